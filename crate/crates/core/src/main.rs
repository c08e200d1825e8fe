fn main() -> std::process::ExitCode {
    sufnec::cli::run(std::env::args_os())
}
