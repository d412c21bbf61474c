#include <stdio.h>
#include <stdlib.h>


static void goodG2B()
{
    char * data = getenv("ADD");
    if (data != NULL)
    {
        printf("%s\n", data);
    }
}

void CWE134_Uncontrolled_Format_String__char_environment_printf_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE134_Uncontrolled_Format_String__char_environment_printf_01_good();
    return 0;
}
