fn main() {
    std::process::exit(tractalign_cli::run(std::env::args_os()));
}
