fn main() {
    std::process::exit(hcsp::cli::run(std::env::args_os()));
}
