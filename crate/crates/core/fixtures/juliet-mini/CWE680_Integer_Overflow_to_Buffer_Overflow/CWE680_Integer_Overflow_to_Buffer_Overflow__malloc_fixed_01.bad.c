#include <stdlib.h>

void CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_bad()
{
    int data = 1073741824;
    int * buf = (int *)malloc(data * sizeof(int));
    buf[0] = 0;
    free(buf);
}


int main(int argc, char * argv[])
{
    CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_bad();
    return 0;
}
