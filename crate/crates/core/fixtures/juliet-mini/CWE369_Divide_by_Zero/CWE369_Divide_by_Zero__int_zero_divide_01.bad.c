#include <stdio.h>

void CWE369_Divide_by_Zero__int_zero_divide_01_bad()
{
    int data = 0;
    printf("%d\n", 100 / data);
}


int main(int argc, char * argv[])
{
    CWE369_Divide_by_Zero__int_zero_divide_01_bad();
    return 0;
}
