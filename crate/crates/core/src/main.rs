fn main() {
    std::process::exit(rigid_gas::cli::run(std::env::args_os()));
}
