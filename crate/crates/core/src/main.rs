fn main() {
    std::process::exit(hybridsim::cli::run(std::env::args_os()));
}
