//! Command line front end: `hyst <subcommand> [flags]`.
//!
//! Every flag can also come from a TOML file passed with `--config`, one
//! section per subcommand and one key per long flag name. Flags given on the
//! command line win over the file.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};

mod args;
mod commands;
mod config;
mod error;
mod reproduce;

pub use error::CliError;

use args::{CalibrateArgs, OdeConvergenceArgs, OdeRunArgs, PdeConvergenceArgs, PdeRunArgs, ReproduceArgs, ScanArgs, SignatureArgs};

#[derive(Debug, Parser)]
#[command(name = "hyst", version, about = "Hysteresis models, calibration and time stepping")]
pub struct Cli {
    /// TOML file with one `[subcommand]` section of flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a pair of primary curves and write a model file.
    Calibrate(CalibrateArgs),
    /// Drive a model through a sequence of input peaks.
    Scan(ScanArgs),
    /// Threshold pairs and weights of a linear-band model.
    Signature(SignatureArgs),
    /// Implicit Euler run of `d/dt (a(u) + w) = f`.
    Ode(OdeRunArgs),
    /// Errors of several step sizes against the last one.
    OdeConvergence(OdeConvergenceArgs),
    /// Upwind transport with hysteresis.
    Pde(PdeRunArgs),
    /// Errors of several mesh sizes against the last one.
    PdeConvergence(PdeConvergenceArgs),
    /// Regenerate the data behind a figure or table.
    Reproduce(ReproduceArgs),
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on usage or input errors, 1 when a
/// numerical step fails.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::merge(&Cli::command(), argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Scan(a) => commands::scan(&a),
        Command::Signature(a) => commands::signature(&a),
        Command::Ode(a) => commands::ode(&a),
        Command::OdeConvergence(a) => commands::ode_convergence(&a),
        Command::Pde(a) => commands::pde(&a),
        Command::PdeConvergence(a) => commands::pde_convergence(&a),
        Command::Reproduce(a) => reproduce::run(&a),
    }
}
