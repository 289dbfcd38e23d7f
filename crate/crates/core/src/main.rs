fn main() {
    std::process::exit(tiltcopula::cli::main_from(std::env::args_os()));
}
