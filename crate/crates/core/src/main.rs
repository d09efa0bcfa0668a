fn main() {
    std::process::exit(hinf_autopilot::cli::main_with_args(std::env::args_os()));
}
