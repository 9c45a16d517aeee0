//! `treecp` command-line driver.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use treecp::parallel::{threads_from_env, with_threads};
use treecp::Error;

use config::{Cli, Command, ExperimentConfig};
use output::{Header, Sink};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence(_) | Error::BeyondSingularity { .. } | Error::NoBracket(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn execute(cmd: &Command) -> Result<Vec<std::path::PathBuf>, CliError> {
    let name = cmd.name();
    let cfg = ExperimentConfig::from_command(cmd)?.resolve(name)?;
    let mut sink = Sink::new(&cfg.out(), Header::new(name, &cfg))?;
    with_threads(threads_from_env(), || match cmd {
        Command::Simulate { .. } => commands::simulate(&cfg, &mut sink),
        Command::Estimate { .. } => commands::estimate(&cfg, &mut sink),
        Command::Phase { .. } => commands::phase(&cfg, &mut sink),
        Command::Report { .. } => commands::report(&cfg, &mut sink),
        Command::Gw { .. } => commands::gw(&cfg, &mut sink),
    })?;
    Ok(sink.written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("treecp: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_codes() {
        let code = |e: Error| CliError::from(e).code();
        assert_eq!(code(Error::NonConvergence("x".into())), 3);
        assert_eq!(code(Error::BeyondSingularity { z: 1.0 }), 3);
        assert_eq!(code(Error::NoBracket("x".into())), 3);
        assert_eq!(code(Error::Parameter("x".into())), 2);
        assert_eq!(code(Error::ParseWord("x".into())), 2);
        assert_eq!(CliError::Io("x".into()).code(), 4);
    }
}
