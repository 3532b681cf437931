//! Command-line front end for interaction-free measurement analysis. The
//! `ifm` binary is a thin wrapper around [`run`].

mod commands;
mod input;
mod manifest;
mod output;
mod svg;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

/// Exit status of a command that ran to completion.
pub enum Outcome {
    Success,
    /// Data or simulation failed a consistency or oracle check (exit 2).
    Inconsistent(String),
    /// Calibration ended above the residual bound (exit 3).
    CalibrationFailed(String),
}

#[derive(Parser)]
#[command(name = "ifm", version, about = "Interaction-free measurement analysis")]
struct Cli {
    /// Suppress the human-readable summary on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce detector counts to outcome probabilities.
    Reduce(commands::reduce::Args),
    /// Fit interferometer parameters to measured targets.
    Calibrate(commands::calibrate::Args),
    /// Tabulate single-test enrichment curves.
    Curves(commands::curves::Args),
    /// Monte Carlo simulation of an object ensemble.
    Simulate(commands::simulate::Args),
    /// Scan the attenuator transmittance.
    Optimize(commands::optimize::Args),
    /// Rerun the command recorded in a manifest and verify its outputs.
    Replay(commands::replay::Args),
}

/// Per-invocation settings shared by all commands.
pub(crate) struct Context {
    pub argv: Vec<String>,
    pub quiet: bool,
}

impl Context {
    /// Prints a human-readable summary unless `--quiet` was given.
    pub fn report(&self, text: &str) {
        if !self.quiet {
            eprint!("{text}");
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 success, 1 usage or validation error, 2 failed
/// consistency check, 3 calibration above its residual bound.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let ctx = Context {
        argv: argv
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Reduce(args) => commands::reduce::run(args, &ctx),
        Command::Calibrate(args) => commands::calibrate::run(args, &ctx),
        Command::Curves(args) => commands::curves::run(args, &ctx),
        Command::Simulate(args) => commands::simulate::run(args, &ctx),
        Command::Optimize(args) => commands::optimize::run(args, &ctx),
        Command::Replay(args) => commands::replay::run(args, &ctx),
    };
    match result {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::Inconsistent(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Ok(Outcome::CalibrationFailed(msg)) => {
            eprintln!("error: {msg}");
            3
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ifm_core::Error>() {
                Some(ifm_core::Error::InconsistentExposure { .. }) => 2,
                _ => 1,
            }
        }
    }
}
