#include <stdlib.h>
#define BUF_SIZE \
    100
#ifdef _WIN32
#define SLEEP Sleep
#endif

static int staticFive = 5;

void CWE398_macros_bad()
{
    if (staticFive == 5)
    {
        char * buf = (char *)malloc(BUF_SIZE);
        free(buf);
    }
}

void CWE398_macros_good()
{
    CWE398_macros_bad();
}
