fn main() {
    std::process::exit(umbra::cli::run(std::env::args_os()));
}
