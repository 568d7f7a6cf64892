fn main() {
    std::process::exit(lcuprep_cli::main_with_args(std::env::args_os()));
}
