fn main() {
    std::process::exit(hidden_ode::cli::run());
}
