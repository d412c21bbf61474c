#include <stdio.h>

#ifndef OMITBAD
void CWE457_Use_of_Uninitialized_Variable__int_01_bad()
{
    int data;
    printf("%d\n", data);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    int data = 5;
    printf("%d\n", data);
}

void CWE457_Use_of_Uninitialized_Variable__int_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE457_Use_of_Uninitialized_Variable__int_01_good();
#endif
#ifndef OMITBAD
    CWE457_Use_of_Uninitialized_Variable__int_01_bad();
#endif
    return 0;
}
