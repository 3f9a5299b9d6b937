fn main() {
    std::process::exit(torus_polymer_cli::run_command(std::env::args_os()));
}
