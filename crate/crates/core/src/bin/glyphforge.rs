fn main() {
    std::process::exit(glyphforge::cli::main_with_env());
}
