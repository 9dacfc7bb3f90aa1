//! Batch front end for the estimator. One subcommand per experiment.
//!
//! Every command writes into its own output directory and finishes with a
//! `manifest.json` holding a hash of the configuration and a checksum of each
//! file. Outputs are byte-identical across reruns with the same inputs.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use wcett::dag::DagError;
use wcett::estimator::EstimatorError;
use wcett::milp::MilpError;
use wcett::platform::PlatformError;
use wcett::spanner::SpannerError;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "wcett", version, about = "Worst-case execution path estimation from path measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate a benchmark DAG and a synthetic platform.
    Gen(GenArgs),
    /// Measure basis paths (or all feasible paths) on a platform.
    Measure(MeasureArgs),
    /// Refine a spanner basis until its accuracy constant reaches a target.
    Basis(BasisArgs),
    /// Estimate the longest feasible path.
    Estimate(EstimateArgs),
    /// Estimate with several ranked paths (`estimate` with a larger --top).
    Topk(EstimateArgs),
    /// Sweep multiplicative measurement perturbations and report D.
    Perturb(PerturbArgs),
    /// Compare the basis-path baseline against the estimator.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Diamond,
    Layered,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    Uniform,
    /// Deviation `+mu_max` on one hidden path, zero elsewhere.
    Adversarial,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    /// Uniform integers in [1, 100].
    Random,
    Unit,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Number of diamonds.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    #[arg(long, default_value_t = 3)]
    pub width: usize,
    /// Edge probability between consecutive layers.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Random two-edge exclusion sets to add.
    #[arg(long, default_value_t = 0)]
    pub exclusions: usize,
    #[arg(long, value_enum, default_value_t = WeightKind::Random)]
    pub weights: WeightKind,
    #[arg(long, default_value_t = 1.0)]
    pub mu_max: f64,
    #[arg(long, value_enum, default_value_t = Law::Uniform)]
    pub law: Law,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureArgs {
    #[arg(long)]
    pub dag: PathBuf,
    #[arg(long)]
    pub platform: PathBuf,
    /// Measure every feasible path instead of the spanner basis.
    #[arg(long)]
    pub all: bool,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BasisArgs {
    #[arg(long)]
    pub dag: PathBuf,
    /// Target accuracy constant A (at least 1).
    #[arg(long, default_value_t = 2.0)]
    pub accuracy: f64,
    /// Write real timings instead of zeros.
    #[arg(long)]
    pub wall_clock: bool,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub dag: PathBuf,
    /// Platform to measure on. Mutually exclusive with --measurements.
    #[arg(long, conflicts_with = "measurements", required_unless_present = "measurements")]
    pub platform: Option<PathBuf>,
    /// Fixed measurements (`path;length` CSV).
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub accuracy: f64,
    /// Number of ranked paths K.
    #[arg(long)]
    pub top: Option<usize>,
    /// Stop once a path's estimate drops below T_max - 2kD.
    #[arg(long)]
    pub early_stop: bool,
    /// Also write the first worst-path program as an LP file.
    #[arg(long)]
    pub emit_lp: bool,
    #[arg(long)]
    pub wall_clock: bool,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub dag: PathBuf,
    #[arg(long, conflicts_with = "measurements", required_unless_present = "measurements")]
    pub platform: Option<PathBuf>,
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    /// Comma-separated percentages; empty for none.
    #[arg(long, default_value = "0,10,25,50")]
    pub levels: String,
    /// Number of perturbation seeds per level.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// First perturbation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// DAG files, paired in order with --platform.
    #[arg(long, required = true)]
    pub dag: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub platform: Vec<PathBuf>,
    #[serde(skip)]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<DagError> for CliError {
    fn from(e: DagError) -> Self {
        match e {
            DagError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PlatformError> for CliError {
    fn from(e: PlatformError) -> Self {
        match e {
            PlatformError::Io { .. } => CliError::Io(e.to_string()),
            PlatformError::Dag(d) => d.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MilpError> for CliError {
    fn from(e: MilpError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<SpannerError> for CliError {
    fn from(e: SpannerError) -> Self {
        match e {
            SpannerError::Dag(d) => d.into(),
            SpannerError::MissingMeasurement { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::BadParameter(_) | EstimatorError::NoMeasurements => CliError::Config(e.to_string()),
            EstimatorError::Platform(p) => p.into(),
            EstimatorError::Dag(d) => d.into(),
            EstimatorError::Spanner(s) => s.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wcett: {e}");
            e.exit_code()
        }
    }
}
