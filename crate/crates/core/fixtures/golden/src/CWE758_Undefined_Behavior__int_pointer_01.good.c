#include <stdio.h>


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

int main(int argc, char * argv[])
{
    CWE758_Undefined_Behavior__int_pointer_01_good();
    return 0;
}
