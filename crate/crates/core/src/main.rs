fn main() {
    std::process::exit(camech::cli::main());
}
