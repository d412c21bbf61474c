#include <stdlib.h>

void CWE78_OS_Command_Injection__char_environment_system_01_bad()
{
    char * data = getenv("ADD");
    if (data != NULL)
    {
        system(data);
    }
}


int main(int argc, char * argv[])
{
    CWE78_OS_Command_Injection__char_environment_system_01_bad();
    return 0;
}
