fn main() {
    std::process::exit(lateri::cli::run_cli(std::env::args_os()));
}
