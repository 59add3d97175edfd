//! `rkit` — command-line front end for the predictive-multiplicity
//! toolkit.
//!
//! Subcommands: `capacity` (per-sample capacity plus full report),
//! `metrics` (ambiguity/discrepancy only), `reduce` (per-sample support
//! reduction), `select` (greedy model selection), `explore` (logistic
//! Rashomon-set generation), and `report` (recompute summaries from a
//! saved per-sample file). Exit codes: 0 success, 1 validation error,
//! 2 I/O error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
pub mod io;

pub use io::{load_score_tensor, save_report, save_tensor, ScoreFileManifest, SummaryFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl From<rkit_core::Error> for CliError {
    fn from(err: rkit_core::Error) -> Self {
        CliError::Validation(err.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rkit",
    version,
    about = "Predictive-multiplicity toolkit: per-sample Rashomon Capacity, ambiguity and \
             discrepancy, score-set reduction, greedy model selection, and a logistic \
             Rashomon-set explorer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-sample capacity over the Rashomon set, with tail/CDF report
    Capacity(CapacityArgs),
    /// Ambiguity and discrepancy of thresholded predictions only
    Metrics(MetricsArgs),
    /// Reduce each sample's score set to at most c representative models
    Reduce(ReduceArgs),
    /// Greedily select r models that preserve mean capacity
    Select(SelectArgs),
    /// Generate a Rashomon set for logistic regression and emit tensors
    Explore(ExploreArgs),
    /// Recompute summary statistics from a saved per_sample.csv
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// loss ≤ epsilon
    Absolute,
    /// loss ≤ best loss + epsilon
    Relative,
}

impl From<ModeArg> for rkit_core::RashomonMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Absolute => rkit_core::RashomonMode::Absolute,
            ModeArg::Relative => rkit_core::RashomonMode::Relative,
        }
    }
}

#[derive(Debug, Args)]
pub struct TensorArgs {
    /// Score-tensor manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Rashomon parameter: loss slack defining the model set
    #[arg(long)]
    pub epsilon: f64,
    /// How epsilon thresholds the losses
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub mode: ModeArg,
    /// Reference model id (default: the lowest-loss model)
    #[arg(long)]
    pub base_model: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Capacity-solver stopping width, in bits
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Capacity-solver iteration cap
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
    /// Worker threads for per-sample loops (default: all cores; the
    /// RKIT_THREADS variable overrides the default, this flag wins)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub tensor: TensorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for summary.json, per_sample.csv, cdf.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub tensor: TensorArgs,
    /// Output directory for summary.json
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Score-tensor manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Optional Rashomon parameter; omitted = reduce over all models
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// How epsilon thresholds the losses
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub mode: ModeArg,
    /// Input weights at or below this value are dropped from the support
    #[arg(long, default_value_t = 1e-6)]
    pub support_threshold: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for reduce.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Score-tensor manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Optional Rashomon parameter; omitted = select among all models
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// How epsilon thresholds the losses
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub mode: ModeArg,
    /// Number of models to select
    #[arg(long)]
    pub r: usize,
    /// Seed for the initial random pick
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate candidates on this many seeded random samples instead of
    /// all of them
    #[arg(long)]
    pub sample_cap: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for selection.json
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// Synthetic two-Gaussian dataset, e.g. `n=400,d=2,sep=6,seed=7`
    #[arg(long, conflicts_with = "data")]
    pub synthetic: Option<String>,
    /// Feature/label CSV with a header row (see --label-col)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column name in --data; all other columns are features
    #[arg(long, default_value = "label")]
    pub label_col: String,
    /// Comma-separated Rashomon budgets (mean nats over the base loss)
    #[arg(long, value_delimiter = ',', required = true)]
    pub epsilons: Vec<f64>,
    /// Adversarial term magnitude (default: auto-scaled per target)
    #[arg(long)]
    pub strength: Option<f64>,
    /// Target-class score that stops a perturbation walk
    #[arg(long, default_value_t = 0.9)]
    pub score_cap: f64,
    /// Newton step scale during perturbation
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// Perturbation step cap per walk
    #[arg(long, default_value_t = 500)]
    pub max_steps: usize,
    /// Newton iteration cap for training
    #[arg(long, default_value_t = 100)]
    pub train_iters: usize,
    /// Gradient-norm threshold that ends training
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tolerance: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for per-epsilon tensors and explore_summary.json
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A per_sample.csv previously written by `capacity`
    #[arg(long)]
    pub per_sample: PathBuf,
    /// Output directory for summary.json and cdf.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Runs a parsed command; errors carry their exit-code category.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Capacity(args) => commands::capacity(args),
        Command::Metrics(args) => commands::metrics(args),
        Command::Reduce(args) => commands::reduce(args),
        Command::Select(args) => commands::select(args),
        Command::Explore(args) => commands::explore(args),
        Command::Report(args) => commands::report(args),
    }
}

/// Full argv-to-exit-code entry point.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
