fn main() {
    std::process::exit(cavity_dimer::cli::run(std::env::args_os()));
}
