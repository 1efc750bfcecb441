//! Encoder/decoder LSTM surrogate: normalization, windowing, forward and
//! backward passes, RMSprop training, rolling prediction and the model file.

mod codec;
mod dataset;
mod lstm;
mod norm;
mod optim;
mod predict;
mod seq2seq;
mod train;

pub use codec::{load_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use dataset::{make_windows, window_starts, WindowedDataset};
pub use lstm::{sigmoid, CellTrace, LstmCellParams};
pub use norm::{fit_normalizer, NormStats, SignalStats};
pub use optim::RmsProp;
pub use predict::{predict_horizon, predict_rolling, predict_window};
pub use seq2seq::{mse_loss, Dims, ForwardCache, Seq2SeqModel, Seq2SeqParams, Window};
pub use train::{train, train_with, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::historian::HistorianError;

pub const DEFAULT_FEATURES: [&str; 5] = ["E100.u", "P100.mdot", "SRC.Tin", "V106.u", "T100.level"];
pub const DEFAULT_LABEL: &str = "T100.T";
pub const DEFAULT_ENC_LEN: usize = 30;
pub const DEFAULT_DEC_LEN: usize = 10;
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("SHAPE_MISMATCH: {0}")]
    ShapeMismatch(String),
    #[error("CONSTANT_SIGNAL: {0}")]
    ConstantSignal(String),
    #[error("FRAME_TOO_SHORT: {len} rows, need {need}")]
    FrameTooShort { len: usize, need: usize },
    #[error("NOT_FIXED_GRID: {0}")]
    NotFixedGrid(String),
    #[error("EMPTY_DATASET")]
    EmptyDataset,
    #[error("NONFINITE_LOSS: epoch {epoch}")]
    NonfiniteLoss { epoch: usize },
    #[error("MODEL_MALFORMED: {0}")]
    ModelMalformed(String),
    #[error("UNKNOWN_TAG: {0}")]
    UnknownTag(String),
    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),
}

impl SurrogateError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Self::ConstantSignal(_) => "CONSTANT_SIGNAL",
            Self::FrameTooShort { .. } => "FRAME_TOO_SHORT",
            Self::NotFixedGrid(_) => "NOT_FIXED_GRID",
            Self::EmptyDataset => "EMPTY_DATASET",
            Self::NonfiniteLoss { .. } => "NONFINITE_LOSS",
            Self::ModelMalformed(_) => "MODEL_MALFORMED",
            Self::UnknownTag(_) => "UNKNOWN_TAG",
            Self::InvalidConfig(_) => "INVALID_CONFIG",
        }
    }
}

impl From<HistorianError> for SurrogateError {
    fn from(e: HistorianError) -> Self {
        match e {
            HistorianError::UnknownTag(t) => Self::UnknownTag(t),
            HistorianError::NotFixedGrid(d) => Self::NotFixedGrid(d),
            other => Self::ShapeMismatch(other.to_string()),
        }
    }
}

/// Which tags a surrogate reads and predicts and over what windows. The same
/// feature list feeds the encoder and the decoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub features: Vec<String>,
    pub label: String,
    pub enc_len: usize,
    pub dec_len: usize,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
            label: DEFAULT_LABEL.to_string(),
            enc_len: DEFAULT_ENC_LEN,
            dec_len: DEFAULT_DEC_LEN,
        }
    }
}

impl SurrogateSpec {
    pub fn dims(&self, hidden: usize) -> Dims {
        Dims {
            enc_features: self.features.len(),
            dec_features: self.features.len(),
            hidden,
            enc_len: self.enc_len,
            dec_len: self.dec_len,
        }
    }

    pub fn feature_refs(&self) -> Vec<&str> {
        self.features.iter().map(String::as_str).collect()
    }
}
