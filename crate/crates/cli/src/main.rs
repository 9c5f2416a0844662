//! `gs`: build leader-follower networks, certify identifiability, simulate
//! and identify leaders from velocity data.

mod commands;
mod files;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gs_core::dynamics::Integrator;

#[derive(Debug, Parser)]
#[command(name = "gs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Generate a densifying graph sequence from a JSON config.
    Gen(GenArgs),
    /// Fiedler pair and Perron check for one graph.
    Spectral(GraphArgs),
    /// Identifiability conditions for one graph; exits 0 only if they hold
    /// and leaders separate from followers.
    Check(GraphArgs),
    /// Simulate the dynamics and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Run the identification pipeline on one graph.
    Identify(IdentifyArgs),
    /// Cross-check spectral results against a reference solver and the
    /// pipeline against the true Fiedler vector.
    Oracle(OracleArgs),
    /// Identification pipeline over many instances.
    Pipeline(PipelineArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Output {
    /// Directory for all outputs; created if missing.
    #[arg(short, long, default_value = "gs-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenArgs {
    /// Sequence config JSON.
    pub config: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GraphArgs {
    /// Graph JSON with 1-based labels.
    pub graph: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorArg {
    Rk4,
    Exact,
}

impl From<IntegratorArg> for Integrator {
    fn from(i: IntegratorArg) -> Self {
        match i {
            IntegratorArg::Rk4 => Integrator::Rk4,
            IntegratorArg::Exact => Integrator::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Drive {
    /// Inputs JSON: `{"inputs": [{"leader": 2, "u": [..]}, ..], "x0": [[..], ..]}`;
    /// anything omitted is drawn from `--seed`.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Exact)]
    pub integrator: IntegratorArg,
    /// Start at the steady state (no transient).
    #[arg(long)]
    pub x0_steady: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub drive: Drive,
    /// Defaults to the dominance-certified measurement time.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Defaults to `t_final / 1000`, limited to `0.1 / lambda_max` for rk4.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IdentifyArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub drive: Drive,
    /// Measurement time; defaults to the dominance-certified time.
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Approximate number of recorded samples.
    #[arg(long, default_value_t = 200)]
    pub record_points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb the Fiedler vector before the cross-checks (negative control).
    #[arg(long, hide = true)]
    pub tamper: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PipelineArgs {
    /// Graph files; without any, `--count` certified instances are generated.
    pub graphs: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Exact)]
    pub integrator: IntegratorArg,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
}

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    /// Conditions unmet or identification failed.
    Domain(String),
    /// Unreadable, malformed or inconsistent input.
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GS_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Domain(m) => eprintln!("gs: {m}"),
                Failure::Input(m) => eprintln!("gs: input error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
