fn main() {
    std::process::exit(fission::cli::run(std::env::args_os()));
}
