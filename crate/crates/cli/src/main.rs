//! `mabtune` — command-line runner for the adaptive tuning stack.
//!
//! Subcommands cover the synthetic single-tuner sweep (`simulate`), the
//! discrete-event worker cluster (`distributed`), the multi-agent regime
//! scenarios (`dynamic`), live operator demos (`demo conv`, `demo join`),
//! and overhead micro-benchmarks (`bench-overhead`).
//!
//! Every command seeds all randomness from `--seed`, writes a metrics CSV
//! plus a JSON summary that echoes the fully resolved configuration, and
//! exits 0 on success, 2 on usage errors, 3 on runtime failures.

mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use mabtune_sim::Error;

#[derive(Parser, Debug)]
#[command(name = "mabtune", version, about = "Run adaptive operator-tuning experiments")]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            // Bad parameters are usage errors (like clap's own exit code 2);
            // anything else is a runtime failure.
            match err {
                Error::Config(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
