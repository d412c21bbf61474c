/* Juliet-style header
 * spanning lines */
#include <stdio.h>
// line comment with "quotes"
static int helper(int x) { return x * 2; } /* trailing */

void CWE134_case_bad()
{
    char * s = "a \"quoted\" // not a comment";
    printf("%s %d\n", s, helper(3)); // done
}

int main(void)
{
    CWE134_case_bad();
    return 0;
}
