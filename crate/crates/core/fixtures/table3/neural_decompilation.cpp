static char* funct0(char *data){
    data = new char[100];
    return data;
}
void funct1(){
    char * data ;
    data = NULL ;
    data = funct0(data);
    delete data ;
}
