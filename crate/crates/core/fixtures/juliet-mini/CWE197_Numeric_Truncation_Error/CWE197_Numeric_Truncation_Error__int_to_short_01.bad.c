#include <stdio.h>

void CWE197_Numeric_Truncation_Error__int_to_short_01_bad()
{
    int data = 40000;
    short result = (short)data;
    printf("%hd\n", result);
}


int main(int argc, char * argv[])
{
    CWE197_Numeric_Truncation_Error__int_to_short_01_bad();
    return 0;
}
