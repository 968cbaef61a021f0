fn main() {
    std::process::exit(anisolevy::cli::run(std::env::args_os()));
}
