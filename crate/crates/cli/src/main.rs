use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ifm_cli::run(std::env::args_os()))
}
