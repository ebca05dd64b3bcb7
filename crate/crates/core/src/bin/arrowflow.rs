fn main() {
    std::process::exit(arrowflow::cli::run(std::env::args_os()));
}
