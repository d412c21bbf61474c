#include <stdio.h>
#include <stdlib.h>

#ifndef OMITBAD
void CWE194_Unexpected_Sign_Extension__short_malloc_01_bad()
{
    short data = -1;
    char * buf = (char *)malloc(data);
    free(buf);
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE194_Unexpected_Sign_Extension__short_malloc_01_good();
#endif
#ifndef OMITBAD
    CWE194_Unexpected_Sign_Extension__short_malloc_01_bad();
#endif
    return 0;
}
