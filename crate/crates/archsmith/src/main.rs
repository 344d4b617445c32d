use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(archsmith::cli::run(std::env::args()) as u8)
}
