mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

/// Exit statuses.
const EXIT_OTHER: u8 = 1;
const EXIT_INPUT: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Flag combinations clap cannot reject on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ecm_core::Error>() {
            return if e.is_input_error() { EXIT_INPUT } else { EXIT_VALIDATION };
        }
        if cause.is::<UsageError>() {
            return EXIT_VALIDATION;
        }
        if cause.is::<std::io::Error>() || cause.is::<config::ConfigError>() {
            return EXIT_INPUT;
        }
    }
    EXIT_OTHER
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Coverage(args) => commands::coverage(args),
        Command::DumpRow(args) => commands::dump_row(args),
        Command::Synth(args) => commands::synth(args),
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
