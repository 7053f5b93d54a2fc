fn main() {
    std::process::exit(nhmdp::cli::dispatch(std::env::args_os()));
}
