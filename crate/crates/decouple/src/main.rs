fn main() {
    std::process::exit(decouple::cli::run(std::env::args_os()));
}
