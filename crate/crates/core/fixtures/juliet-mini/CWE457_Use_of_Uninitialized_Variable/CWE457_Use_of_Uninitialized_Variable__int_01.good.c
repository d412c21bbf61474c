#include <stdio.h>


static void goodG2B()
{
    int data = 5;
    printf("%d\n", data);
}

void CWE457_Use_of_Uninitialized_Variable__int_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE457_Use_of_Uninitialized_Variable__int_01_good();
    return 0;
}
