fn main() {
    std::process::exit(sbic::cli::run())
}
