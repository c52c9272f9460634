fn main() {
    std::process::exit(satadapt::cli::run(std::env::args_os()));
}
