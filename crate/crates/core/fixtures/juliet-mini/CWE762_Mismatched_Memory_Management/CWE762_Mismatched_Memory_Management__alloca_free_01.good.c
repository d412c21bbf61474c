#include <stdlib.h>
#include <alloca.h>


static void goodG2B()
{
    int * data = (int *)malloc(sizeof(int));
    *data = 5;
    free(data);
}

void CWE762_Mismatched_Memory_Management__alloca_free_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE762_Mismatched_Memory_Management__alloca_free_01_good();
    return 0;
}
