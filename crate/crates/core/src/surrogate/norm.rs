//! Per-signal z-score normalization.

use serde::{Deserialize, Serialize};

use super::{SurrogateError, SurrogateSpec};
use crate::historian::TimeSeriesFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    pub tag: String,
    pub mean: f64,
    pub std: f64,
}

impl SignalStats {
    /// Sample mean and population standard deviation.
    pub fn fit(tag: &str, values: &[f64]) -> Result<Self, SurrogateError> {
        if values.len() < 2 {
            return Err(SurrogateError::ConstantSignal(format!("{tag}: fewer than 2 samples")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        // Rounding noise on a constant column is not variance.
        if !std.is_finite() || std <= 1e-12 * mean.abs().max(1.0) {
            return Err(SurrogateError::ConstantSignal(tag.to_string()));
        }
        Ok(Self {
            tag: tag.to_string(),
            mean,
            std,
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    fn validate(&self) -> Result<(), SurrogateError> {
        if !(self.mean.is_finite() && self.std.is_finite() && self.std > 0.0) {
            return Err(SurrogateError::ConstantSignal(format!(
                "{}: mean {} std {}",
                self.tag, self.mean, self.std
            )));
        }
        Ok(())
    }
}

/// Fits one [`SignalStats`] per tag, in the given order.
pub fn fit_normalizer(frame: &TimeSeriesFrame, tags: &[&str]) -> Result<Vec<SignalStats>, SurrogateError> {
    tags.iter().map(|t| SignalStats::fit(t, &frame.column(t)?)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub features: Vec<SignalStats>,
    pub label: SignalStats,
}

impl NormStats {
    pub fn fit(frame: &TimeSeriesFrame, spec: &SurrogateSpec) -> Result<Self, SurrogateError> {
        Ok(Self {
            features: fit_normalizer(frame, &spec.feature_refs())?,
            label: SignalStats::fit(&spec.label, &frame.column(&spec.label)?)?,
        })
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        self.features.iter().chain([&self.label]).try_for_each(SignalStats::validate)
    }

    /// Normalizes a row-major block of feature rows in place.
    pub fn apply_features(&self, rows: &mut [f64]) {
        let f = self.features.len();
        for row in rows.chunks_mut(f) {
            for (v, s) in row.iter_mut().zip(&self.features) {
                *v = s.apply(*v);
            }
        }
    }
}
