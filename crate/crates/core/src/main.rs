use std::process::ExitCode;

fn main() -> ExitCode {
    fscpu::cli::run_from_args(std::env::args_os())
}
