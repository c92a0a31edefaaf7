fn main() {
    std::process::exit(attractor_core::cli::run(std::env::args().collect()));
}
