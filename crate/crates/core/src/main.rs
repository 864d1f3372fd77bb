fn main() {
    std::process::exit(ttscale::cli::run(std::env::args_os()));
}
