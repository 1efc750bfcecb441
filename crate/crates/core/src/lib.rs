//! Building blocks for a hybrid digital twin of a small water process plant.
//!
//! The crate is split along the pipeline a twin goes through:
//!
//! - [`plant`]: fixed-step first-principles simulator (tank, pump, heater,
//!   load valve, PI loops).
//! - [`historian`]: tagged time-series frames, the CSV exchange format,
//!   irregular-sampling emulation and fixed-grid resampling.
//! - [`surrogate`]: LSTM encoder/decoder model trained with BPTT and RMSprop.
//! - [`hybrid`]: binding a surrogate to plant terminals and running open-loop,
//!   replacement, and state-tracking simulations, plus comparison metrics.
//! - [`cosim`]: newline-delimited JSON protocol for hosting a surrogate in a
//!   separate process.

// Negated comparisons are how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cosim;
pub mod historian;
pub mod hybrid;
pub mod plant;
pub mod rng;
pub mod surrogate;

pub use historian::{GridSpec, TimeSeriesFrame};
pub use plant::{PlantState, PlantTopology, ScenarioSchedule};
pub use surrogate::{Seq2SeqModel, SurrogateSpec};
