fn main() {
    std::process::exit(rangekit_cli::main_with_args(std::env::args_os()));
}
