fn main() {
    std::process::exit(hepflow_cli::run(std::env::args_os().collect()));
}
