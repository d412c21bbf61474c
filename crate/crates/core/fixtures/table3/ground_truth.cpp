static void funct0(long *data){
    delete data;
}
void funct1(){
    long * data;
    data = NULL;
    data = new long[100];
    funct0(data);
}
