fn main() {
    std::process::exit(harness::cli::main_with_args(std::env::args_os()));
}
