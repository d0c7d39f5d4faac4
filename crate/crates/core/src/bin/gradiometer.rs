fn main() {
    std::process::exit(spinor_gradiometry::cli::main_with_args(std::env::args_os()));
}
