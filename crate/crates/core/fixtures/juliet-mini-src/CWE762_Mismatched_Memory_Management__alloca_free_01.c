#include <stdlib.h>
#include <alloca.h>

#ifndef OMITBAD
void CWE762_Mismatched_Memory_Management__alloca_free_01_bad()
{
    int * data = (int *)alloca(sizeof(int));
    *data = 5;
    free(data);
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE762_Mismatched_Memory_Management__alloca_free_01_good();
#endif
#ifndef OMITBAD
    CWE762_Mismatched_Memory_Management__alloca_free_01_bad();
#endif
    return 0;
}
