fn main() {
    std::process::exit(etl::cli::run(std::env::args_os()));
}
