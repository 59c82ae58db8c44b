use std::process::ExitCode;

fn main() -> ExitCode {
    nsai::cli::main_with_args(std::env::args_os())
}
