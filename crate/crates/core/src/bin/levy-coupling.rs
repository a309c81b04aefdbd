fn main() {
    std::process::exit(levy_coupling::cli::run(std::env::args_os()));
}
