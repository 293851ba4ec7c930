fn main() {
    std::process::exit(ifsynth::cli::run(std::env::args_os()));
}
