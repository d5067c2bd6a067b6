fn main() {
    std::process::exit(tricrit::cli::run(std::env::args_os()));
}
