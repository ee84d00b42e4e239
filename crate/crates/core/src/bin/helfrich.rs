use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use helfrich::cli::{execute, Cli, CliError};

fn run(cli: &Cli) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    execute(cli, &mut stdout.lock()).with_context(|| format!("{} failed", cli.command.name()))
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<CliError>().map_or(1, CliError::exit_code))
        }
    }
}
