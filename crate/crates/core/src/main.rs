use std::process::ExitCode;

fn main() -> ExitCode {
    modswitch::cli::run(std::env::args_os())
}
