fn main() {
    std::process::exit(esr_core::experiment::run_cli(std::env::args_os()));
}
