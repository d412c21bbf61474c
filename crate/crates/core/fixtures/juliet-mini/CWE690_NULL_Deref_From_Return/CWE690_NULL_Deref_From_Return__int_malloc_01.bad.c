#include <stdlib.h>

void CWE690_NULL_Deref_From_Return__int_malloc_01_bad()
{
    int * data = (int *)malloc(sizeof(int));
    *data = 5;
    free(data);
}


int main(int argc, char * argv[])
{
    CWE690_NULL_Deref_From_Return__int_malloc_01_bad();
    return 0;
}
