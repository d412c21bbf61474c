#include <stdio.h>

#ifndef OMITBAD
void CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_bad()
{
    if (fputs("string", stdout) == 0)
    {
        printf("%d\n", 0);
    }
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    if (fputs("string", stdout) == EOF)
    {
        printf("%d\n", 0);
    }
}

void CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_good();
#endif
#ifndef OMITBAD
    CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_bad();
#endif
    return 0;
}
