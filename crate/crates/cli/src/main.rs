//! `tac`: score reward weights, train them, run the reproduction studies and
//! host the tuning service.
//!
//! Exit codes: 0 ok, 1 a study criterion failed, 2 bad input, 3 degenerate
//! data, 4 environment (filesystem, network).

mod data;
mod reproduce;
mod score;
mod serve;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tac", version, about = "Trajectory alignment scoring and reward learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score weights against labelled preferences.
    Tac(score::TacArgs),
    /// Learn weights from labelled preferences and write run artifacts.
    Train(train::TrainArgs),
    /// Run a named study and check it against its criteria.
    Reproduce(reproduce::ReproduceArgs),
    /// Host the tuning service.
    Serve(serve::ServeArgs),
    /// Write a built-in toy dataset.
    Fixture(data::FixtureArgs),
    /// Generate a synthetic dataset from random true weights.
    Synth(data::SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Input dataset location shared by several subcommands.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Preference file; its header names the trajectory file.
    #[arg(long, short = 'p')]
    pub preferences: PathBuf,
    /// Trajectory file, overriding the one named by the preference header.
    #[arg(long, short = 't')]
    pub trajectories: Option<PathBuf>,
}

impl DataArgs {
    pub fn load(&self) -> Result<tac_core::datalab::io::LoadedDataset, CliError> {
        let loaded = self.load_quiet()?;
        for w in loaded.dataset.transitivity_warnings() {
            eprintln!("warning: preference cycle among {}", w.trajectories.join(", "));
        }
        Ok(loaded)
    }

    fn load_quiet(&self) -> Result<tac_core::datalab::io::LoadedDataset, CliError> {
        use tac_core::datalab::io::{load_dataset, parse_dataset};
        match &self.trajectories {
            None => load_dataset(&self.preferences).map_err(|e| input_error(&self.preferences, e)),
            Some(t) => {
                let read = |p: &PathBuf| {
                    std::fs::read_to_string(p).map_err(|e| CliError::new(2, format!("{}: {e}", p.display())))
                };
                parse_dataset(&read(t)?, &read(&self.preferences)?).map_err(|e| input_error(&self.preferences, e))
            }
        }
    }
}

fn input_error(path: &std::path::Path, e: tac_core::Error) -> CliError {
    let code = CliError::from(e.clone()).code;
    CliError::new(code, format!("{}: {e}", path.display()))
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(e: &tac_core::Error) -> u8 {
    use tac_core::Error as E;
    match e {
        E::DegenerateDataset { .. } | E::NonFiniteLoss { .. } => 3,
        E::Stage { source, .. } => exit_code(source),
        _ => 2,
    }
}

impl From<tac_core::Error> for CliError {
    fn from(e: tac_core::Error) -> Self {
        CliError::new(exit_code(&e), e.to_string())
    }
}

pub fn environment(context: impl fmt::Display, e: impl fmt::Display) -> CliError {
    CliError::new(4, format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tac(a) => score::run(a),
        Command::Train(a) => train::run(a),
        Command::Reproduce(a) => reproduce::run(a),
        Command::Serve(a) => serve::run(a),
        Command::Fixture(a) => data::fixture(a),
        Command::Synth(a) => data::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&tac_core::Error::Parse { line: 3, message: "x".into() }), 2);
        let degenerate = tac_core::Error::DegenerateDataset {
            human_strict: 0,
            induced_strict: 1,
        };
        assert_eq!(exit_code(&degenerate), 3);
        let staged = tac_core::Error::Stage {
            stage: "training",
            source: Box::new(degenerate),
        };
        assert_eq!(exit_code(&staged), 3);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
