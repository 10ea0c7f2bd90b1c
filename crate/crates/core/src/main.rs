fn main() {
    std::process::exit(dynasep::cli::run(std::env::args_os()));
}
