#include <stdio.h>


static void goodG2B()
{
    int data = 7;
    if (data != 0)
    {
        printf("%d\n", 100 / data);
    }
}

void CWE369_Divide_by_Zero__int_zero_divide_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE369_Divide_by_Zero__int_zero_divide_01_good();
    return 0;
}
