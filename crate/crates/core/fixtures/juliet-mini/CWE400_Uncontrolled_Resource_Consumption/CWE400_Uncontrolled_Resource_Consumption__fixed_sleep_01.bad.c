#include <unistd.h>

void CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_bad()
{
    unsigned int count = 4294967295u;
    sleep(count);
}


int main(int argc, char * argv[])
{
    CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_bad();
    return 0;
}
