fn main() {
    std::process::exit(sap_core::harness::cli::cli_main(std::env::args_os()));
}
