fn main() {
    std::process::exit(qaegap_cli::run(std::env::args_os()));
}
