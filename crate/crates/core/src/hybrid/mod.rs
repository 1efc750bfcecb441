//! Surrogate-in-the-loop simulation: terminal binding, open-loop, replacement
//! and tracking runs, and the metrics used to compare them.

mod binding;
mod metrics;
mod run;

pub use binding::{bind_surrogate, EchoOracle, HorizonModel, TerminalBinding};
pub use metrics::{compare_runs, compute_metrics, oscillation_index, rise_time, Metrics, Preference, Ranking, StepEvent};
pub use run::{nudge_state, run_hybrid, run_open_loop, HybridConfig, HybridMode, HybridRun, RunComparison};

use thiserror::Error;

use crate::plant::PlantError;
use crate::surrogate::SurrogateError;

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const OSCILLATION_WINDOW: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error("UNKNOWN_TAG: {0}")]
    UnknownTag(String),
    #[error("DIM_MISMATCH: {0}")]
    DimMismatch(String),
    #[error("REMOTE_SPEC_MISMATCH: {0}")]
    RemoteSpecMismatch(String),
    #[error("FRAME_TOO_SHORT: {len} rows, need {need}")]
    FrameTooShort { len: usize, need: usize },
    #[error("TRACK_WITHOUT_GAIN")]
    TrackWithoutGain,
    #[error("GAIN_RANGE: {0}")]
    GainRange(f64),
    #[error("NO_STEP_EVENT")]
    NoStepEvent,
    #[error("NEVER_CROSSES: {0}")]
    NeverCrosses(String),
    #[error("REFERENCE_MISMATCH: {0}")]
    ReferenceMismatch(String),
    #[error("SHAPE_MISMATCH: {0}")]
    ShapeMismatch(String),
    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    /// Failure reported by a model hosted elsewhere, with its own code.
    #[error("{code}: {detail}")]
    Remote { code: String, detail: String },
}

impl HybridError {
    pub fn code(&self) -> &str {
        match self {
            Self::UnknownTag(_) => "UNKNOWN_TAG",
            Self::DimMismatch(_) => "DIM_MISMATCH",
            Self::RemoteSpecMismatch(_) => "REMOTE_SPEC_MISMATCH",
            Self::FrameTooShort { .. } => "FRAME_TOO_SHORT",
            Self::TrackWithoutGain => "TRACK_WITHOUT_GAIN",
            Self::GainRange(_) => "GAIN_RANGE",
            Self::NoStepEvent => "NO_STEP_EVENT",
            Self::NeverCrosses(_) => "NEVER_CROSSES",
            Self::ReferenceMismatch(_) => "REFERENCE_MISMATCH",
            Self::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Self::InvalidConfig(_) => "INVALID_CONFIG",
            Self::Plant(e) => e.code(),
            Self::Surrogate(e) => e.code(),
            Self::Remote { code, .. } => code,
        }
    }
}
