fn main() {
    std::process::exit(sessft::cli::run());
}
