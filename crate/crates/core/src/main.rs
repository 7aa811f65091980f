fn main() {
    std::process::exit(rbmvote::cli::main_with_args(std::env::args_os()));
}
