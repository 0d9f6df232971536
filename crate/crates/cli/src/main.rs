fn main() {
    std::process::exit(daoclass_cli::run_cli(std::env::args_os()));
}
