//! `heatctl` command line: configuration, experiment runs and result export.

pub mod config;
pub mod export;
pub mod json;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use run::run;

use config::FieldError;
use export::ExportError;

pub const EXIT_OK: i32 = 0;
/// Runtime failure: solver error, I/O error.
pub const EXIT_FAILURE: i32 = 1;
/// The configuration failed to parse or validate.
pub const EXIT_INVALID_CONFIG: i32 = 2;
/// `y0` already lies in the target ball.
pub const EXIT_INSIDE_TARGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "heatctl",
    version,
    about = "Minimal-time and minimal-norm control of the semilinear heat equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created when missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace a configuration field, e.g. `grid.n=63` or `nonlinearity.kind=scaled_tanh`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Uncontrolled trajectory and decay check.
    Simulate(Common),
    /// Free-decay hitting time of the target ball.
    Gamma(Common),
    /// Minimal control bound reaching the ball at time T.
    Minnorm {
        /// Horizon; defaults to `experiment.horizon`.
        #[arg(value_name = "T")]
        horizon: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Minimal time to reach the ball with control bound M.
    Mintime {
        /// Control bound; defaults to `experiment.bound`.
        #[arg(value_name = "M")]
        bound: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Round trips tau(alpha(T)) and alpha(tau(M)).
    Equivalence(Common),
    /// tau and alpha curves.
    Sweep(Common),
    /// Solver values against the closed form and the Galerkin bracket.
    OracleCompare(Common),
    /// Adjoint gradient against finite differences.
    Gradcheck(Common),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration")]
    Config(Vec<FieldError>),
    #[error("y0 lies in the target ball: ‖y0‖ = {norm} <= r = {radius}")]
    InsideTarget { norm: f64, radius: f64 },
    #[error(transparent)]
    Solver(#[from] crate::Error),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_INVALID_CONFIG,
            CliError::InsideTarget { .. } | CliError::Solver(crate::Error::InsideTarget { .. }) => {
                EXIT_INSIDE_TARGET
            }
            _ => EXIT_FAILURE,
        }
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID_CONFIG
            } else {
                EXIT_OK
            };
        }
    };
    match run(&cli.command) {
        Ok(path) => {
            println!("{}", path.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("heatctl: {e}");
            if let CliError::Config(fields) = &e {
                for f in fields {
                    eprintln!("  {f}");
                }
            }
            e.exit_code()
        }
    }
}
