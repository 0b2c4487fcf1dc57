fn main() {
    std::process::exit(hyst_cli::run(std::env::args_os()));
}
