fn main() {
    std::process::exit(wsd::cli::run(std::env::args()));
}
