#include <stdlib.h>

void CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_bad()
{
    size_t data = (size_t)rand();
    char * buf = (char *)malloc(data);
    free(buf);
}


int main(int argc, char * argv[])
{
    CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_bad();
    return 0;
}
