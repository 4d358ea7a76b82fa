fn main() {
    std::process::exit(homoglab::cli::cli_main(std::env::args_os()));
}
