fn main() {
    std::process::exit(trp_cli::cli_main(std::env::args_os()));
}
