fn main() -> std::process::ExitCode {
    harnet::cli::main()
}
