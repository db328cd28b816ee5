use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(susk::cli::run(std::env::args_os()))
}
