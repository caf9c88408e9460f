fn main() {
    std::process::exit(readout_core::cli::main_with_args(std::env::args_os()));
}
