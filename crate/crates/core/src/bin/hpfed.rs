fn main() {
    std::process::exit(hpfed::cli::main_with_args(std::env::args_os()));
}
