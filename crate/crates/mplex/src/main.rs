fn main() {
    std::process::exit(mplex::cli::run(std::env::args()));
}
