fn main() {
    std::process::exit(sandbox_cli::run(std::env::args_os()));
}
