#include <stdlib.h>


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

int main(int argc, char * argv[])
{
    CWE590_Free_Memory_Not_on_Heap__free_int_01_good();
    return 0;
}
