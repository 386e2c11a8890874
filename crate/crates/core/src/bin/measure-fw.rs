fn main() {
    std::process::exit(measure_fw::cli::run(std::env::args_os()));
}
