fn main() {
    std::process::exit(heatctl::cli::main_with(std::env::args_os()));
}
