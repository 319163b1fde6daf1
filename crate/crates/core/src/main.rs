fn main() {
    std::process::exit(metareg::cli::run(std::env::args_os()));
}
