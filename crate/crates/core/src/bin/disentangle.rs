fn main() {
    std::process::exit(disentangle::cli::run_cli(std::env::args_os()));
}
