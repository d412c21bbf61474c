#include <cstdio>

namespace CWE762_Mismatched_Memory_Management__new_free_01
{

void bad()
{
    long * data = new long[100];
    free(data);
}

static void goodG2B()
{
    long * data = new long[100];
    delete [] data;
}

void good()
{
    goodG2B();
}

} /* close namespace */

int main(int argc, char * argv[])
{
    CWE762_Mismatched_Memory_Management__new_free_01::good();
    return 0;
}
