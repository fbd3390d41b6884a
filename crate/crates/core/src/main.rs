fn main() {
    std::process::exit(qsonify::cli::run(std::env::args_os()));
}
