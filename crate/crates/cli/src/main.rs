fn main() {
    std::process::exit(crosscut_cli::cli::main_with(std::env::args_os()));
}
