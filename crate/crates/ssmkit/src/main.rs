use std::process::ExitCode;

fn main() -> ExitCode {
    ssmkit::cli::main()
}
