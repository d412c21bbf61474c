#include <stdio.h>
#include <stdlib.h>

void CWE194_Unexpected_Sign_Extension__short_malloc_01_bad()
{
    short data = -1;
    char * buf = (char *)malloc(data);
    free(buf);
}


int main(int argc, char * argv[])
{
    CWE194_Unexpected_Sign_Extension__short_malloc_01_bad();
    return 0;
}
