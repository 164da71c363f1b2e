fn main() {
    std::process::exit(blurkit_cli::run(std::env::args_os()));
}
