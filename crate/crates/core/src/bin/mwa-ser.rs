fn main() -> std::process::ExitCode {
    mwa_ser::cli::main_with_args(std::env::args_os())
}
