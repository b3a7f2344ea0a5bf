fn main() {
    std::process::exit(gridscreen::cli::run(std::env::args_os()));
}
