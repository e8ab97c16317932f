fn main() {
    std::process::exit(bornsim::cli::run(std::env::args_os()));
}
