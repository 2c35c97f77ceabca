fn main() {
    std::process::exit(nframes::cli::run_from(std::env::args_os()));
}
