#include <stdio.h>

#ifndef OMITBAD
void CWE369_Divide_by_Zero__int_zero_divide_01_bad()
{
    int data = 0;
    printf("%d\n", 100 / data);
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE369_Divide_by_Zero__int_zero_divide_01_good();
#endif
#ifndef OMITBAD
    CWE369_Divide_by_Zero__int_zero_divide_01_bad();
#endif
    return 0;
}
