fn main() {
    std::process::exit(bindecomp::cli::run(std::env::args_os()));
}
