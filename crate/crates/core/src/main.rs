fn main() {
    std::process::exit(splinekit::cli::run(std::env::args_os()));
}
