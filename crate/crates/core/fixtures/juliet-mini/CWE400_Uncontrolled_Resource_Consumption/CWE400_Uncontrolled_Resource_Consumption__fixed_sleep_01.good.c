#include <unistd.h>


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

int main(int argc, char * argv[])
{
    CWE400_Uncontrolled_Resource_Consumption__fixed_sleep_01_good();
    return 0;
}
