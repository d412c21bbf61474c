#include <stdlib.h>

#ifndef OMITBAD
void CWE590_Free_Memory_Not_on_Heap__free_int_01_bad()
{
    int data[4];
    data[0] = 1;
    free(data);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    int * data = (int *)malloc(4 * sizeof(int));
    data[0] = 1;
    free(data);
}

void CWE590_Free_Memory_Not_on_Heap__free_int_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE590_Free_Memory_Not_on_Heap__free_int_01_good();
#endif
#ifndef OMITBAD
    CWE590_Free_Memory_Not_on_Heap__free_int_01_bad();
#endif
    return 0;
}
