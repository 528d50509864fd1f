fn main() {
    std::process::exit(nrdiag_cli::main_with_args(std::env::args_os()));
}
