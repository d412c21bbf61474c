#include <stdlib.h>


static void goodG2B()
{
    int * data = (int *)malloc(sizeof(int));
    if (data != NULL)
    {
        *data = 5;
        free(data);
    }
}

void CWE690_NULL_Deref_From_Return__int_malloc_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE690_NULL_Deref_From_Return__int_malloc_01_good();
    return 0;
}
