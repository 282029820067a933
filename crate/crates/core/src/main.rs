fn main() {
    std::process::exit(igs::cli::main_with_args(std::env::args_os()));
}
