fn main() {
    std::process::exit(slimseiz::cli::run(std::env::args_os()));
}
