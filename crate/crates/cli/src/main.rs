fn main() {
    std::process::exit(nalu_cli::main_with(std::env::args_os()));
}
