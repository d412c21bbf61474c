#include <stdio.h>

#ifndef OMITBAD
void CWE121_Stack_Based_Buffer_Overflow__char_loop_01_bad()
{
    char buf[10];
    int i;
    for (i = 0; i <= 10; i++)
    {
        buf[i] = 'A';
    }
    printf("%c\n", buf[0]);
}
#endif

#ifndef OMITGOOD
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
#endif

int main(int argc, char * argv[])
{
#ifndef OMITGOOD
    CWE121_Stack_Based_Buffer_Overflow__char_loop_01_good();
#endif
#ifndef OMITBAD
    CWE121_Stack_Based_Buffer_Overflow__char_loop_01_bad();
#endif
    return 0;
}
