fn main() {
    std::process::exit(hmhd_core::cli::run());
}
