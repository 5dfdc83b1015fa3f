fn main() {
    std::process::exit(pqgcn::cli::run(std::env::args().collect()));
}
