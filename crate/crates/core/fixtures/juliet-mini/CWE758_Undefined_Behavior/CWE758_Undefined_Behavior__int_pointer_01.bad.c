#include <stdio.h>

void CWE758_Undefined_Behavior__int_pointer_01_bad()
{
    int * data;
    int value = *data;
    printf("%d\n", value);
}


int main(int argc, char * argv[])
{
    CWE758_Undefined_Behavior__int_pointer_01_bad();
    return 0;
}
