fn main() {
    std::process::exit(mwi_core::cli::run(std::env::args_os()));
}
