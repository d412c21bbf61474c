#include <unistd.h>

#ifndef OMITBAD
void CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_bad()
{
    unsigned int count = 4294967295u;
    sleep(count);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    unsigned int count = 1;
    if (count < 10)
    {
        sleep(count);
    }
}

void CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_good();
#endif
#ifndef OMITBAD
    CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_bad();
#endif
    return 0;
}
