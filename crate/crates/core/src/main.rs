fn main() {
    std::process::exit(fibseg::cli::run(std::env::args_os()));
}
