fn main() {
    std::process::exit(seaper::cli::main_with_args(std::env::args_os()));
}
