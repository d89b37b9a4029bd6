fn main() {
    std::process::exit(gaussprep::cli::main_with_args(std::env::args_os()));
}
