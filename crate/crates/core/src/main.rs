fn main() {
    std::process::exit(supergauss::cli::run(std::env::args_os()));
}
