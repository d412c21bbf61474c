#include <stdio.h>


static void goodG2B()
{
    char buf[10];
    int i;
    for (i = 0; i < 10; i++)
    {
        buf[i] = 'A';
    }
    printf("%c\n", buf[0]);
}

void CWE121_Stack_Based_Buffer_Overflow__char_loop_01_good()
{
    goodG2B();
}

int main(int argc, char * argv[])
{
    CWE121_Stack_Based_Buffer_Overflow__char_loop_01_good();
    return 0;
}
