fn main() {
    std::process::exit(ergograph_cli::run(std::env::args_os()));
}
