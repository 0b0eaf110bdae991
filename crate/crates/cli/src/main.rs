fn main() {
    std::process::exit(polyfact_cli::run(std::env::args_os()));
}
