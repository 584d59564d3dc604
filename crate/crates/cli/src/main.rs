use std::process::ExitCode;

fn main() -> ExitCode {
    let code = cesaro::run(std::env::args_os().collect(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
