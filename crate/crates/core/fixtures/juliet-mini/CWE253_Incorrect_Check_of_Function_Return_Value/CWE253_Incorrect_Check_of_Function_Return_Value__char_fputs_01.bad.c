#include <stdio.h>

void CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_bad()
{
    if (fputs("string", stdout) == 0)
    {
        printf("%d\n", 0);
    }
}


int main(int argc, char * argv[])
{
    CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_bad();
    return 0;
}
