fn main() {
    std::process::exit(tfc_cli::run(std::env::args_os()));
}
