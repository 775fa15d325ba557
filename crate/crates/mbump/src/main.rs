fn main() -> std::process::ExitCode {
    mbump::cli::main()
}
