fn main() -> std::process::ExitCode {
    ofitrade::cli::main()
}
