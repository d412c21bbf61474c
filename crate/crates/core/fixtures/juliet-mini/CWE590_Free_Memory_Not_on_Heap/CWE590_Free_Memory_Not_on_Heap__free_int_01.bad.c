#include <stdlib.h>

void CWE590_Free_Memory_Not_on_Heap__free_int_01_bad()
{
    int data[4];
    data[0] = 1;
    free(data);
}


int main(int argc, char * argv[])
{
    CWE590_Free_Memory_Not_on_Heap__free_int_01_bad();
    return 0;
}
