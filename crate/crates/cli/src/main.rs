fn main() {
    std::process::exit(ose_cli::run(std::env::args_os()));
}
