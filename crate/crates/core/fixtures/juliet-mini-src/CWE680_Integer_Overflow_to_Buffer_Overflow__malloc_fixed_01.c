#include <stdlib.h>

#ifndef OMITBAD
void CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_bad()
{
    int data = 1073741824;
    int * buf = (int *)malloc(data * sizeof(int));
    buf[0] = 0;
    free(buf);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    int data = 20;
    int * buf = (int *)malloc(data * sizeof(int));
    buf[0] = 0;
    free(buf);
}

void CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_good();
#endif
#ifndef OMITBAD
    CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_bad();
#endif
    return 0;
}
