use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mpg_cli::run(std::env::args_os()))
}
