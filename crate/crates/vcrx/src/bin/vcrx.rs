fn main() {
    std::process::exit(vcrx::cli::run())
}
