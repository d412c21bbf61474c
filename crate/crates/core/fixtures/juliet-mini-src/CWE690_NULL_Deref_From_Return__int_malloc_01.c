#include <stdlib.h>

#ifndef OMITBAD
void CWE690_NULL_Deref_From_Return__int_malloc_01_bad()
{
    int * data = (int *)malloc(sizeof(int));
    *data = 5;
    free(data);
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE690_NULL_Deref_From_Return__int_malloc_01_good();
#endif
#ifndef OMITBAD
    CWE690_NULL_Deref_From_Return__int_malloc_01_bad();
#endif
    return 0;
}
