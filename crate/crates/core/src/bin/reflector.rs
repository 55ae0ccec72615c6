fn main() {
    std::process::exit(reflector_core::cli::run(std::env::args_os()));
}
