fn main() {
    std::process::exit(pstnet::cli::run(std::env::args_os()));
}
