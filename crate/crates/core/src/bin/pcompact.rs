fn main() {
    std::process::exit(pcompact::cli::main_with_args(std::env::args_os()));
}
