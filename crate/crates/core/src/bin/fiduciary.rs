fn main() {
    std::process::exit(fiduciary::cli::main_with_args(std::env::args_os()));
}
