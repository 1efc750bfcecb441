//! Inference in signal units.

use super::seq2seq::Seq2SeqModel;
use super::SurrogateError;
use crate::historian::TimeSeriesFrame;

/// Row-major feature rows for `tags` over `rows`.
fn gather(frame: &TimeSeriesFrame, cols: &[usize], rows: std::ops::Range<usize>) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        let row = frame.row(r);
        out.extend(cols.iter().map(|&c| row[c]));
    }
    out
}

fn feature_columns(model: &Seq2SeqModel, frame: &TimeSeriesFrame) -> Result<Vec<usize>, SurrogateError> {
    model
        .norm
        .features
        .iter()
        .map(|s| frame.require_tag(&s.tag).map_err(SurrogateError::from))
        .collect()
}

fn require_grid(frame: &TimeSeriesFrame, what: &str) -> Result<(), SurrogateError> {
    if frame.len() >= 2 && frame.uniform_step().is_none() {
        return Err(SurrogateError::NotFixedGrid(format!("{what} frame is not on a uniform grid")));
    }
    Ok(())
}

/// One window in signal units: `enc` is `T_enc x F`, `dec` is `T_dec x F`,
/// both raw. Returns `T_dec` label values.
pub fn predict_window(model: &Seq2SeqModel, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>, SurrogateError> {
    let mut enc = enc.to_vec();
    let mut dec = dec.to_vec();
    if enc.len() != model.dims.enc_len * model.dims.enc_features
        || dec.len() != model.dims.dec_len * model.dims.dec_features
    {
        return Err(SurrogateError::ShapeMismatch(format!(
            "window with {} encoder and {} decoder values",
            enc.len(),
            dec.len()
        )));
    }
    model.norm.apply_features(&mut enc);
    model.norm.apply_features(&mut dec);
    let z = model.predict(&enc, &dec)?;
    Ok(z.into_iter().map(|v| model.norm.label.invert(v)).collect())
}

/// Predicts the `T_dec` label values following `history` (its last `T_enc`
/// rows feed the encoder) using the first `T_dec` rows of `future`.
pub fn predict_horizon(
    model: &Seq2SeqModel,
    history: &TimeSeriesFrame,
    future: &TimeSeriesFrame,
) -> Result<TimeSeriesFrame, SurrogateError> {
    let d = model.dims;
    if history.len() < d.enc_len {
        return Err(SurrogateError::FrameTooShort {
            len: history.len(),
            need: d.enc_len,
        });
    }
    if future.len() < d.dec_len {
        return Err(SurrogateError::FrameTooShort {
            len: future.len(),
            need: d.dec_len,
        });
    }
    require_grid(history, "history")?;
    require_grid(future, "future")?;
    let enc = gather(history, &feature_columns(model, history)?, history.len() - d.enc_len..history.len());
    let dec = gather(future, &feature_columns(model, future)?, 0..d.dec_len);
    let y = predict_window(model, &enc, &dec)?;
    let times = future.times()[..d.dec_len].to_vec();
    Ok(TimeSeriesFrame::from_columns(times, vec![(model.norm.label.tag.clone(), y)])?)
}

/// Rolls the model over `frame` from row `from` to the end, re-anchoring the
/// encoder on the preceding `T_enc` rows every `T_dec` steps. A short final
/// block repeats its last feature row; outputs past the frame are dropped,
/// which leaves the kept ones unchanged because the decoder is causal.
pub fn predict_rolling(
    model: &Seq2SeqModel,
    frame: &TimeSeriesFrame,
    from: usize,
) -> Result<TimeSeriesFrame, SurrogateError> {
    let d = model.dims;
    if from < d.enc_len || from >= frame.len() {
        return Err(SurrogateError::FrameTooShort {
            len: frame.len(),
            need: d.enc_len.max(from) + 1,
        });
    }
    require_grid(frame, "input")?;
    let cols = feature_columns(model, frame)?;
    let f = cols.len();
    let mut y = Vec::with_capacity(frame.len() - from);
    let mut a = from;
    while a < frame.len() {
        let end = (a + d.dec_len).min(frame.len());
        let enc = gather(frame, &cols, a - d.enc_len..a);
        let mut dec = gather(frame, &cols, a..end);
        let last = dec[dec.len() - f..].to_vec();
        while dec.len() < d.dec_len * f {
            dec.extend_from_slice(&last);
        }
        let block = predict_window(model, &enc, &dec)?;
        y.extend_from_slice(&block[..end - a]);
        a = end;
    }
    let times = frame.times()[from..].to_vec();
    Ok(TimeSeriesFrame::from_columns(times, vec![(model.norm.label.tag.clone(), y)])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{Dims, NormStats, Seq2SeqParams, SignalStats};

    fn model(label_mean: f64, label_std: f64, seed: Option<u64>) -> Seq2SeqModel {
        let d = Dims {
            enc_features: 2,
            dec_features: 2,
            hidden: 3,
            enc_len: 4,
            dec_len: 3,
        };
        let s = |t: &str, m: f64, sd: f64| SignalStats {
            tag: t.into(),
            mean: m,
            std: sd,
        };
        let params = seed.map_or_else(|| Seq2SeqParams::zeros(&d), |s| Seq2SeqParams::init(&d, s));
        Seq2SeqModel::new(
            d,
            params,
            NormStats {
                features: vec![s("a", 1.0, 2.0), s("b", -3.0, 0.5)],
                label: s("y", label_mean, label_std),
            },
        )
        .unwrap()
    }

    fn frame(n: usize) -> TimeSeriesFrame {
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        TimeSeriesFrame::from_columns(
            t.clone(),
            vec![
                ("a".into(), t.iter().map(|v| (v * 0.1).sin()).collect()),
                ("b".into(), t.iter().map(|v| (v * 0.07).cos()).collect()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_model_predicts_label_mean() {
        let m = model(45.0, 5.0, None);
        let f = frame(10);
        let y = predict_horizon(&m, &f.slice_rows(0, 4), &f.slice_rows(4, 7)).unwrap();
        assert_eq!(y.column("y").unwrap(), vec![45.0; 3]);
        assert_eq!(y.times(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn rolling_emits_one_value_per_row() {
        let m = model(45.0, 5.0, Some(2));
        let f = frame(104);
        let y = predict_rolling(&m, &f, 4).unwrap();
        assert_eq!(y.len(), 100);
        assert_eq!(y.times()[0], 4.0);
        assert_eq!(y.uniform_step(), Some(1.0));
    }

    #[test]
    fn rolling_matches_horizon_blocks() {
        let m = model(10.0, 2.0, Some(5));
        let f = frame(12);
        let roll = predict_rolling(&m, &f, 4).unwrap().column("y").unwrap();
        let first = predict_horizon(&m, &f.slice_rows(0, 4), &f.slice_rows(4, 7)).unwrap();
        assert_eq!(&roll[..3], first.column("y").unwrap().as_slice());
        let second = predict_horizon(&m, &f.slice_rows(3, 7), &f.slice_rows(7, 10)).unwrap();
        assert_eq!(&roll[3..6], second.column("y").unwrap().as_slice());
        // Last block has two rows and is padded.
        assert_eq!(roll.len(), 8);
    }

    #[test]
    fn errors() {
        let m = model(0.0, 1.0, None);
        let f = frame(10);
        assert_eq!(
            predict_horizon(&m, &f.slice_rows(0, 3), &f.slice_rows(4, 7)).unwrap_err().code(),
            "FRAME_TOO_SHORT"
        );
        assert_eq!(predict_rolling(&m, &f, 2).unwrap_err().code(), "FRAME_TOO_SHORT");
        let gappy = TimeSeriesFrame::from_columns(
            vec![0.0, 1.0, 2.0, 4.0],
            vec![("a".into(), vec![0.0; 4]), ("b".into(), vec![0.0; 4])],
        )
        .unwrap();
        assert_eq!(predict_horizon(&m, &gappy, &f.slice_rows(4, 7)).unwrap_err().code(), "NOT_FIXED_GRID");
        let no_b = f.select(&["a"]).unwrap();
        assert_eq!(predict_rolling(&m, &no_b, 4).unwrap_err().code(), "UNKNOWN_TAG");
    }
}
