fn main() {
    std::process::exit(tightframe::cli::main_with_args(std::env::args_os()));
}
