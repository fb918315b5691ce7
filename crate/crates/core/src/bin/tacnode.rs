fn main() {
    std::process::exit(tacnode::cli::run(std::env::args_os()));
}
