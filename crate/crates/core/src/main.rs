fn main() {
    std::process::exit(satfuse::cli::dispatch(std::env::args_os()));
}
