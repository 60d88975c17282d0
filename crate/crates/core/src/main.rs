fn main() {
    std::process::exit(perqwalk::cli::run(std::env::args_os()));
}
