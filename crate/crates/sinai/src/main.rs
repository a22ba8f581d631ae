fn main() {
    std::process::exit(sinai::cli::run_main());
}
