#include <stdio.h>
#include <limits.h>


static void goodG2B()
{
    int data = 2;
    int result = data + 1;
    printf("%d\n", result);
}

void CWE190_Integer_Overflow__int_add_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE190_Integer_Overflow__int_add_01_good();
    return 0;
}
