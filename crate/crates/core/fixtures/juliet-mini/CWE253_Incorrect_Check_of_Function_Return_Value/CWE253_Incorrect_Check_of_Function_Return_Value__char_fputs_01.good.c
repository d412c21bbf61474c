#include <stdio.h>


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

int main(int argc, char * argv[])
{
    CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_good();
    return 0;
}
