//! Sliding windows over a fixed-grid frame.

use super::seq2seq::Window;
use super::{NormStats, SurrogateError, SurrogateSpec};
use crate::historian::TimeSeriesFrame;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub enc_len: usize,
    pub dec_len: usize,
    pub features: usize,
    pub windows: Vec<Window>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Concatenates datasets with identical dims.
    pub fn extend(&mut self, other: WindowedDataset) -> Result<(), SurrogateError> {
        if (self.enc_len, self.dec_len, self.features) != (other.enc_len, other.dec_len, other.features) {
            return Err(SurrogateError::ShapeMismatch("datasets with different dims".into()));
        }
        self.windows.extend(other.windows);
        Ok(())
    }
}

/// Start rows of every window: `0, stride, 2*stride, ...` while the window fits.
pub fn window_starts(len: usize, enc_len: usize, dec_len: usize, stride: usize) -> Vec<usize> {
    let span = enc_len + dec_len;
    if len < span || stride == 0 {
        return vec![];
    }
    (0..=len - span).step_by(stride).collect()
}

/// Builds normalized windows. Window `k` reads rows `[s, s+T_enc)` for the
/// encoder and `[s+T_enc, s+T_enc+T_dec)` for decoder inputs and labels.
pub fn make_windows(
    frame: &TimeSeriesFrame,
    spec: &SurrogateSpec,
    stride: usize,
    norm: &NormStats,
) -> Result<WindowedDataset, SurrogateError> {
    if stride == 0 {
        return Err(SurrogateError::InvalidConfig("stride must be at least 1".into()));
    }
    if norm.features.len() != spec.features.len() {
        return Err(SurrogateError::ShapeMismatch(format!(
            "{} feature stats for {} features",
            norm.features.len(),
            spec.features.len()
        )));
    }
    let need = spec.enc_len + spec.dec_len;
    if frame.len() < need {
        return Err(SurrogateError::FrameTooShort { len: frame.len(), need });
    }
    if frame.uniform_step().is_none() {
        return Err(SurrogateError::NotFixedGrid("training frame is not on a uniform grid".into()));
    }
    let f = spec.features.len();
    let cols = spec
        .features
        .iter()
        .map(|t| frame.require_tag(t))
        .collect::<Result<Vec<_>, _>>()?;
    let label = frame.require_tag(&spec.label)?;

    let mut feats = Vec::with_capacity(frame.len() * f);
    for r in 0..frame.len() {
        let row = frame.row(r);
        feats.extend(cols.iter().map(|&c| row[c]));
    }
    norm.apply_features(&mut feats);
    let labels: Vec<f64> = (0..frame.len()).map(|r| norm.label.apply(frame.value(r, label))).collect();

    let windows = window_starts(frame.len(), spec.enc_len, spec.dec_len, stride)
        .into_iter()
        .map(|s| {
            let d = s + spec.enc_len;
            Window {
                enc: feats[s * f..d * f].to_vec(),
                dec: feats[d * f..(d + spec.dec_len) * f].to_vec(),
                labels: labels[d..d + spec.dec_len].to_vec(),
            }
        })
        .collect();
    Ok(WindowedDataset {
        enc_len: spec.enc_len,
        dec_len: spec.dec_len,
        features: f,
        windows,
    })
}
