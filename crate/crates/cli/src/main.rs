use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dupviper_cli::run(std::env::args_os()))
}
