fn main() {
    std::process::exit(charperiodic::cli::run(std::env::args_os()));
}
