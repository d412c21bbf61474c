#include <stdio.h>
#include <stdlib.h>

#ifndef OMITBAD
void CWE134_Uncontrolled_Format_String__char_environment_printf_01_bad()
{
    char * data = getenv("ADD");
    if (data != NULL)
    {
        printf(data);
    }
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE134_Uncontrolled_Format_String__char_environment_printf_01_good();
#endif
#ifndef OMITBAD
    CWE134_Uncontrolled_Format_String__char_environment_printf_01_bad();
#endif
    return 0;
}
