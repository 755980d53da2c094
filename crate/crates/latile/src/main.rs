fn main() {
    std::process::exit(latile::cli::main_with_args(std::env::args_os()));
}
