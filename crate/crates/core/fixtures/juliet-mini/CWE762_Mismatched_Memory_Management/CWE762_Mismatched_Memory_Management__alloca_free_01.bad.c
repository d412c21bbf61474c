#include <stdlib.h>
#include <alloca.h>

void CWE762_Mismatched_Memory_Management__alloca_free_01_bad()
{
    int * data = (int *)alloca(sizeof(int));
    *data = 5;
    free(data);
}


int main(int argc, char * argv[])
{
    CWE762_Mismatched_Memory_Management__alloca_free_01_bad();
    return 0;
}
