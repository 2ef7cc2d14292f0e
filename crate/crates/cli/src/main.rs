fn main() {
    std::process::exit(careflow_cli::run(std::env::args_os()));
}
