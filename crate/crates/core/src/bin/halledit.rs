use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(halledit::cli::run(std::env::args_os()))
}
