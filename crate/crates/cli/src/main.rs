mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use serde_json::Map;

use config::{load_config, resolve, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => load_config(path, cli.command.name())?,
        None => Map::new(),
    };
    let job = resolve(&cli.command, file)?;
    if cli.print_config {
        fjsync::io::write_json(std::io::stdout().lock(), &job)?;
        return Ok(());
    }
    commands::run(&job)
}
