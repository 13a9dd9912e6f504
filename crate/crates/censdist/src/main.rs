fn main() {
    std::process::exit(censdist::cli::run());
}
