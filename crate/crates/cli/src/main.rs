use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tractfit_cli::run(std::env::args_os()))
}
