fn main() {
    std::process::exit(restyle::cli::run(std::env::args_os()));
}
