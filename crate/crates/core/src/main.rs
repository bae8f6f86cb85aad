fn main() {
    std::process::exit(ccl_core::cli::run(std::env::args_os()));
}
