#include <stdio.h>


static void goodG2B()
{
    int data = 300;
    short result = (short)data;
    printf("%hd\n", result);
}

void CWE197_Numeric_Truncation_Error__int_to_short_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE197_Numeric_Truncation_Error__int_to_short_01_good();
    return 0;
}
