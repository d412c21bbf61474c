#include <stdio.h>

void CWE457_Use_of_Uninitialized_Variable__int_01_bad()
{
    int data;
    printf("%d\n", data);
}


int main(int argc, char * argv[])
{
    CWE457_Use_of_Uninitialized_Variable__int_01_bad();
    return 0;
}
