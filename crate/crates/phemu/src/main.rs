fn main() {
    std::process::exit(phemu::cli::run(std::env::args_os()));
}
