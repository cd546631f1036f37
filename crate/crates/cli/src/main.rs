fn main() {
    std::process::exit(sphereflow_cli::main_with(std::env::args_os()));
}
