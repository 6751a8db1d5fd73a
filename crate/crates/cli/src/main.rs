fn main() {
    std::process::exit(ellfit_cli::run_from(std::env::args_os()));
}
