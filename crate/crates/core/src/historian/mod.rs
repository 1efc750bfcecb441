//! Time-series storage and exchange.
//!
//! A [`TimeSeriesFrame`] is the unit everything else passes around: the
//! simulator records into one, the CSV codec reads and writes them, and the
//! surrogate builds its training windows from them.

mod csv;
mod frame;
mod resample;

pub use csv::{export_csv, format_decimal, import_csv};
pub use frame::{is_valid_tag, TimeSeriesFrame};
pub use resample::{align_to_frame, jitter_timestamps, resample_fixed_grid, GridSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistorianError {
    #[error("CSV_MALFORMED: line {line}: {detail}")]
    CsvMalformed { line: usize, detail: String },
    #[error("FRAME_INVALID: {0}")]
    FrameInvalid(String),
    #[error("UNKNOWN_TAG: {0}")]
    UnknownTag(String),
    #[error("JITTER_BOUNDS: lo={lo}, hi={hi}")]
    JitterBounds { lo: f64, hi: f64 },
    #[error("NOT_FIXED_GRID: {0}")]
    NotFixedGrid(String),
    #[error("GRID_OUT_OF_RANGE: grid [{grid_start}, {grid_end}] outside data [{data_start}, {data_end}]")]
    GridOutOfRange {
        grid_start: f64,
        grid_end: f64,
        data_start: f64,
        data_end: f64,
    },
    #[error("TAG_COLLISION: {0}")]
    TagCollision(String),
}

impl HistorianError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::CsvMalformed { .. } => "CSV_MALFORMED",
            Self::FrameInvalid(_) => "FRAME_INVALID",
            Self::UnknownTag(_) => "UNKNOWN_TAG",
            Self::JitterBounds { .. } => "JITTER_BOUNDS",
            Self::NotFixedGrid(_) => "NOT_FIXED_GRID",
            Self::GridOutOfRange { .. } => "GRID_OUT_OF_RANGE",
            Self::TagCollision(_) => "TAG_COLLISION",
        }
    }
}
