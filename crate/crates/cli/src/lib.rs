//! The `kbqa` pipeline: one subcommand per stage, connected by files in
//! output directories that each carry a manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use config::{Cli, Command, RunConfig};
use error::CliError;

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::resolve(cli.command, cli.flags)?;
    log::debug!("effective config: {config:?}");
    match config.command {
        Command::Migrate => commands::migrate::run(&config),
        Command::Ground => commands::ground::run(&config),
        Command::Translate => commands::translate::run(&config),
        Command::Stats => commands::stats::run(&config),
        Command::Split => commands::split::run(&config),
        Command::Eval => commands::eval::run(&config),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
