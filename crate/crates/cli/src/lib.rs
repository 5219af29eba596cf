//! Command-line front end: argument types, the example registry and the
//! command implementations behind the `contrakit` binary.

pub mod commands;
pub mod output;
pub mod registry;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{CliError, RunConfig, Source};

#[derive(Debug, Parser)]
#[command(
    name = "contrakit",
    version,
    about = "Contraction analysis and control of two-time-scale systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check contraction of a subsystem over its sampled region.
    Check(CheckArgs),
    /// Simulate the closed loop and write a CSV trajectory.
    Simulate(SimulateArgs),
    /// Estimate constants and print every applicable bound.
    Bounds(BoundsArgs),
    /// Regenerate the data behind figures 1 to 5.
    Reproduce(ReproduceArgs),
    /// List the built-in examples.
    List,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Built-in example id.
    #[arg(long)]
    pub example: Option<String>,
    /// Path to an `.sps` system file.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Perturbation parameter, in (0, 1].
    #[arg(long)]
    pub mu: Option<f64>,
    /// High-gain parameter (k >= 1, mu = 1/k).
    #[arg(long)]
    pub k: Option<f64>,
    /// Grid points per axis for sampled checks.
    #[arg(long, default_value_t = 21)]
    pub per_axis: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sub {
    /// Reduced slow system on the manifold.
    Reduced,
    /// Fast closed loop in the fast states with slow states frozen.
    Fast,
    /// Joint closed loop (open loop for files without controls).
    Full,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub sub: Option<Sub>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Fixed step; defaults to min(mu/50, t_end/10000).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Initial state as comma-separated x then z values.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    #[arg(long)]
    pub svg: bool,
    #[arg(long, env = "CONTRAKIT_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Symmetric clamp on the input (high-gain chain only).
    #[arg(long)]
    pub saturation: Option<f64>,
    /// Sweep mu (or k) over LO:HI:STEPS points.
    #[arg(long)]
    pub sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Also compute the composite-Lyapunov maximum mu.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Figure number, 1 to 5.
    pub figure: u32,
    #[arg(long, env = "CONTRAKIT_OUT", default_value = "out")]
    pub out: PathBuf,
}

/// Runs a parsed command, printing to `out`. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Check(a) => commands::cmd_check(&a, out),
        Command::Simulate(a) => commands::cmd_simulate(&a, out),
        Command::Bounds(a) => commands::cmd_bounds(&a, out),
        Command::Reproduce(a) => commands::cmd_reproduce(&a, out),
        Command::List => commands::cmd_list(out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
