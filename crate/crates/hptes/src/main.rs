fn main() {
    std::process::exit(hptes::cli::cli_main(std::env::args()));
}
