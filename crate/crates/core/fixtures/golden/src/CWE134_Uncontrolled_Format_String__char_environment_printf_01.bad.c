#include <stdio.h>
#include <stdlib.h>

void CWE134_Uncontrolled_Format_String__char_environment_printf_01_bad()
{
    char * data = getenv("ADD");
    if (data != NULL)
    {
        printf(data);
    }
}


int main(int argc, char * argv[])
{
    CWE134_Uncontrolled_Format_String__char_environment_printf_01_bad();
    return 0;
}
