fn main() {
    std::process::exit(gffcube_cli::main_with_args(std::env::args_os()));
}
