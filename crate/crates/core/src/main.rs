fn main() {
    std::process::exit(phase_est_lab::cli::main_with_args(std::env::args_os()));
}
