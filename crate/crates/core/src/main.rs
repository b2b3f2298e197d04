fn main() {
    std::process::exit(bioparse::cli::run(std::env::args_os().collect()));
}
