#include <stdio.h>

void CWE197_literals_bad()
{
    char c = '\n';
    unsigned long v = 0x1FUL;
    double f = 1.5e3;
    long neg = -42L;
    printf("%c %lu %f %ld\n", c, v, f, neg);
}
