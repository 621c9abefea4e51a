fn main() {
    std::process::exit(cca_core::cli::run(std::env::args_os()));
}
