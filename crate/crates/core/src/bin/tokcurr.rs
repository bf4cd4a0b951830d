fn main() -> std::process::ExitCode {
    token_curriculum::cli::main()
}
