fn main() {
    std::process::exit(approx_hamming::cli::run_cli(std::env::args_os()));
}
