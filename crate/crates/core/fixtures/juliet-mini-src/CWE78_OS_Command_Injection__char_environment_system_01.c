#include <stdlib.h>

#ifndef OMITBAD
void CWE78_OS_Command_Injection__char_environment_system_01_bad()
{
    char * data = getenv("ADD");
    if (data != NULL)
    {
        system(data);
    }
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    char * data = "ls";
    system(data);
}

void CWE78_OS_Command_Injection__char_environment_system_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE78_OS_Command_Injection__char_environment_system_01_good();
#endif
#ifndef OMITBAD
    CWE78_OS_Command_Injection__char_environment_system_01_bad();
#endif
    return 0;
}
