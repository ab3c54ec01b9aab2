use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(chaincore_cli::run(std::env::args_os()))
}
