fn main() {
    std::process::exit(mlres::cli::run_from_env());
}
