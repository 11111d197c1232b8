fn main() {
    std::process::exit(idla_cli::run(std::env::args().collect()));
}
