#include <stdio.h>
#include <stdlib.h>


static void goodG2B()
{
    short data = 100;
    char * buf = (char *)malloc(data);
    free(buf);
}

void CWE194_Unexpected_Sign_Extension__short_malloc_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE194_Unexpected_Sign_Extension__short_malloc_01_good();
    return 0;
}
