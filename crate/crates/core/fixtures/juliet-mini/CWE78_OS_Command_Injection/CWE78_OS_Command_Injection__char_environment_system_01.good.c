#include <stdlib.h>


static void goodG2B()
{
    char * data = "ls";
    system(data);
}

void CWE78_OS_Command_Injection__char_environment_system_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE78_OS_Command_Injection__char_environment_system_01_good();
    return 0;
}
