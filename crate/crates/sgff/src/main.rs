fn main() {
    std::process::exit(sgff::cli::main_with_args(std::env::args_os()));
}
