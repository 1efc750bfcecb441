//! Command-line driver for the hybrid digital twin pipeline.
//!
//! Each stage reads and writes plain files so the stages can be chained:
//! `collect` -> `jitter`/`resample` -> `train` -> `openloop`/`hybrid` ->
//! `evaluate` -> `plot`, with `serve` hosting a model for remote coupling.

pub mod config;
pub mod plot;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hytwin_core::cosim::{CosimError, DEFAULT_PORT, DEFAULT_TIMEOUT_SECS};
use hytwin_core::historian::HistorianError;
use hytwin_core::hybrid::HybridError;
use hytwin_core::plant::PlantError;
use hytwin_core::surrogate::SurrogateError;
use thiserror::Error;

pub use config::expand_config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("FILE_NOT_FOUND: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("IO_ERROR: {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CONFIG_INVALID: {0}")]
    Config(String),
    #[error("EMPTY_SERIES: {0}")]
    EmptySeries(String),
    #[error("GRID_MISMATCH: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Historian(#[from] HistorianError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Cosim(#[from] CosimError),
}

impl CliError {
    pub fn code(&self) -> &str {
        match self {
            Self::FileNotFound(_) => "FILE_NOT_FOUND",
            Self::Io { .. } => "IO_ERROR",
            Self::Config(_) => "CONFIG_INVALID",
            Self::EmptySeries(_) => "EMPTY_SERIES",
            Self::GridMismatch(_) => "GRID_MISMATCH",
            Self::Historian(e) => e.code(),
            Self::Plant(e) => e.code(),
            Self::Surrogate(e) => e.code(),
            Self::Hybrid(e) => e.code(),
            Self::Cosim(e) => e.code(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hytwin", version, about = "Hybrid digital twin pipeline: simulate, learn, couple, evaluate")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Seed for jitter and training.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for outputs that are not given an explicit path.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// key=value file of flags; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub stage: Stage,
}

#[derive(Debug, Subcommand)]
pub enum Stage {
    /// Run the physics twin over a set-point-change scenario and record every tag.
    #[command(args_override_self = true)]
    Collect {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Perturb sample timestamps with random gaps.
    #[command(args_override_self = true)]
    Jitter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
    },
    /// Interpolate a recording onto a fixed grid.
    #[command(args_override_self = true)]
    Resample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
    },
    /// Fit the sequence-to-sequence surrogate to one or more recordings.
    #[command(args_override_self = true)]
    Train {
        /// Training recording; repeat for several.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Model file.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Loss history CSV.
        #[arg(long)]
        losses: Option<PathBuf>,
        #[command(flatten)]
        surrogate: SurrogateArgs,
    },
    /// Predict the label from recorded features and score it.
    #[command(args_override_self = true)]
    Openloop {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        event: StepArgs,
    },
    /// Run the scenario with the surrogate coupled to the physics twin.
    #[command(args_override_self = true)]
    Hybrid {
        #[arg(long)]
        model: PathBuf,
        /// open_loop, replace or track.
        #[arg(long, default_value = "track")]
        mode: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1)]
        cadence: usize,
        /// Use a model served at HOST[:PORT] instead of evaluating it in-process.
        #[arg(long, value_name = "HOST[:PORT]")]
        remote: Option<String>,
        #[arg(long, env = "HYTWIN_PORT")]
        port: Option<u16>,
        /// Reply timeout for remote predictions, seconds.
        #[arg(long, default_value_t = DEFAULT_TIMEOUT_SECS)]
        timeout: u64,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        reference_out: Option<PathBuf>,
        #[arg(long)]
        hybrid_out: Option<PathBuf>,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Compare runs against a reference recording.
    #[command(args_override_self = true)]
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Second run to rank against the candidate.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value = "T100.T")]
        tag: String,
        #[command(flatten)]
        event: StepArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Host a model for remote coupling.
    #[command(args_override_self = true)]
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "HYTWIN_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Exit after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Draw series from CSV files as an SVG line plot.
    #[command(args_override_self = true)]
    Plot {
        /// PATH or PATH:TAG; repeat for several series.
        #[arg(long, required = true, value_name = "PATH[:TAG]")]
        series: Vec<String>,
        /// Tag used when a series names none.
        #[arg(long, default_value = "T100.T")]
        tag: String,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Stage {
    pub const NAMES: [&'static str; 9] = [
        "collect", "jitter", "resample", "train", "openloop", "hybrid", "evaluate", "serve", "plot",
    ];
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, default_value_t = 3000.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 40.0)]
    pub sp_initial: f64,
    #[arg(long, default_value_t = 50.0)]
    pub sp_target: f64,
    /// Time of the temperature setpoint step, s.
    #[arg(long, default_value_t = 1000.0)]
    pub step_at: f64,
    /// Multiplier on the tank heat-loss coefficient.
    #[arg(long, default_value_t = 1.0)]
    pub ua_scale: f64,
    /// Seed of the valve and supply-temperature excitation.
    #[arg(long, default_value_t = 7)]
    pub disturbance_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SurrogateArgs {
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 30)]
    pub enc_len: usize,
    #[arg(long, default_value_t = 10)]
    pub dec_len: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Gradient-norm clip; 0 disables.
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    /// Setpoint step time for rise-time measurement.
    #[arg(long)]
    pub step_at: Option<f64>,
    #[arg(long, default_value_t = 40.0)]
    pub step_from: f64,
    #[arg(long, default_value_t = 50.0)]
    pub step_to: f64,
}

/// Parses `args` (including the program name), applying any `--config`
/// file, and runs the selected stage.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = expand_config(args.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    stages::run_stage(cli)
}
