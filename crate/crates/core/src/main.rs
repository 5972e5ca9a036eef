fn main() {
    std::process::exit(aggrank::cli::run(std::env::args_os()));
}
