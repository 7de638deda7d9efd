fn main() {
    std::process::exit(supsim_cli::main_with_args(std::env::args_os()));
}
