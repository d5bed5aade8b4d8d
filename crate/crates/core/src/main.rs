fn main() -> std::process::ExitCode {
    ethlab::cli::main()
}
