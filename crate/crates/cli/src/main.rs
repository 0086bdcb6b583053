fn main() {
    std::process::exit(mugrep_cli::run(std::env::args_os()));
}
