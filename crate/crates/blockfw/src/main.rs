fn main() {
    std::process::exit(blockfw::cli::run(std::env::args_os()));
}
