fn main() {
    std::process::exit(stf_spde::cli::run(std::env::args_os()));
}
