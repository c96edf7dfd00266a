mod commands;
mod scene;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Cli, CliError};

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RADIANT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("RADIANT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn report(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let payload = serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": code,
    });
    eprintln!("{payload}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{}", e.render());
            return report(&CliError::Usage(e.kind().to_string()));
        }
    };
    if let Err(e) = init_threads() {
        return report(&e);
    }
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
