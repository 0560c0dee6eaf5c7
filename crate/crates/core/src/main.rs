fn main() {
    std::process::exit(tssat::cli::main_with_args(std::env::args_os()));
}
