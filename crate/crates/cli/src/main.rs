use std::process::ExitCode;

fn main() -> ExitCode {
    sklimit_cli::main_with_args(std::env::args_os())
}
