#include <stdlib.h>

#ifndef OMITBAD
void CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_bad()
{
    size_t data = (size_t)rand();
    char * buf = (char *)malloc(data);
    free(buf);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    size_t data = 20;
    char * buf = (char *)malloc(data);
    free(buf);
}

void CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_good();
#endif
#ifndef OMITBAD
    CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_bad();
#endif
    return 0;
}
