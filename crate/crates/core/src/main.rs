use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(wwlog::cli::run(std::env::args_os()))
}
