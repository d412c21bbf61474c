#include <stdio.h>
#include <limits.h>

#ifndef OMITBAD
void CWE190_Integer_Overflow__int_add_01_bad()
{
    int data = INT_MAX;
    int result = data + 1;
    printf("%d\n", result);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    int data = 2;
    int result = data + 1;
    printf("%d\n", result);
}

void CWE190_Integer_Overflow__int_add_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE190_Integer_Overflow__int_add_01_good();
#endif
#ifndef OMITBAD
    CWE190_Integer_Overflow__int_add_01_bad();
#endif
    return 0;
}
