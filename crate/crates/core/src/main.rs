fn main() {
    std::process::exit(uavfso::cli::main_with_args(std::env::args_os()));
}
