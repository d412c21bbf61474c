#include <stdio.h>
#include <limits.h>

void CWE190_Integer_Overflow__int_add_01_bad()
{
    int data = INT_MAX;
    int result = data + 1;
    printf("%d\n", result);
}


int main(int argc, char * argv[])
{
    CWE190_Integer_Overflow__int_add_01_bad();
    return 0;
}
