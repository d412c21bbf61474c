#include <stdio.h>

#ifndef OMITBAD
void CWE758_Undefined_Behavior__int_pointer_01_bad()
{
    int * data;
    int value = *data;
    printf("%d\n", value);
}
#endif

#ifndef OMITGOOD
static void goodG2B()
{
    int item = 5;
    int * data = &item;
    int value = *data;
    printf("%d\n", value);
}

void CWE758_Undefined_Behavior__int_pointer_01_good()
{
    goodG2B();
}
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE758_Undefined_Behavior__int_pointer_01_good();
#endif
#ifndef OMITBAD
    CWE758_Undefined_Behavior__int_pointer_01_bad();
#endif
    return 0;
}
