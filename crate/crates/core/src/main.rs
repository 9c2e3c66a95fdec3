fn main() {
    std::process::exit(gafsim::cli::main_with_args(std::env::args_os()));
}
