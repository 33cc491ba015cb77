fn main() {
    std::process::exit(monsoon::cli::run(std::env::args_os()));
}
