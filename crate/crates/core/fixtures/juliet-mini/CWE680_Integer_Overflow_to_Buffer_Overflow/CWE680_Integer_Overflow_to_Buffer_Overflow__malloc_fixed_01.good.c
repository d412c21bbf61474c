#include <stdlib.h>


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

int main(int argc, char * argv[])
{
    CWE680_Integer_Overflow_to_Buffer_Overflow__malloc_fixed_01_good();
    return 0;
}
