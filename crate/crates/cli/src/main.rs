fn main() {
    std::process::exit(rtlab_cli::run(std::env::args_os()));
}
