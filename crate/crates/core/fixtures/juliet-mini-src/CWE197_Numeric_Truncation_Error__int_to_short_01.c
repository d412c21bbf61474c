#include <stdio.h>

#ifndef OMITBAD
void CWE197_Numeric_Truncation_Error__int_to_short_01_bad()
{
    int data = 40000;
    short result = (short)data;
    printf("%hd\n", result);
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE197_Numeric_Truncation_Error__int_to_short_01_good();
#endif
#ifndef OMITBAD
    CWE197_Numeric_Truncation_Error__int_to_short_01_bad();
#endif
    return 0;
}
