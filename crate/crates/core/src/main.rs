fn main() {
    std::process::exit(demasq::cli::run(std::env::args_os()));
}
