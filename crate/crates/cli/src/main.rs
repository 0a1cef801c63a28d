fn main() {
    std::process::exit(gazeattn_cli::run(std::env::args_os()));
}
