#include <stdlib.h>


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

int main(int argc, char * argv[])
{
    CWE789_Uncontrolled_Mem_Alloc__malloc_char_rand_01_good();
    return 0;
}
