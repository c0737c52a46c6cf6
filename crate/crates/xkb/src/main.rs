fn main() -> std::process::ExitCode {
    xkb::cli::main()
}
