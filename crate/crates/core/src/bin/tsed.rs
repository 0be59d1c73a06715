fn main() {
    std::process::exit(tsed_core::cli::run(std::env::args_os()));
}
