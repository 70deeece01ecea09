fn main() {
    std::process::exit(kinklab::cli::run_from(std::env::args_os()));
}
