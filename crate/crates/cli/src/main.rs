use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use czhardy_cli::{configure_threads_from_env, run, Cli, RunError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("czhardy: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Returns whether every invariant held.
fn execute(cli: &Cli) -> Result<bool, RunError> {
    configure_threads_from_env()?;
    let report = run(cli)?;
    let text = report.render(cli.format)?;
    match &cli.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    if !report.ok() {
        // CSV output carries no witnesses, so they always go to stderr too
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
    }
    Ok(report.ok())
}
