fn main() {
    std::process::exit(bose_bounds_cli::run_from_args(std::env::args_os()));
}
