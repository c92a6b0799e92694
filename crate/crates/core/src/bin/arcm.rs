fn main() -> std::process::ExitCode {
    arcm::cli::main()
}
