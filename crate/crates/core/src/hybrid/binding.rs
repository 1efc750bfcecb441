//! Mapping a surrogate onto plant terminals.

use super::HybridError;
use crate::historian::TimeSeriesFrame;
use crate::plant::PlantTopology;
use crate::surrogate::{predict_window, Seq2SeqModel, SurrogateSpec};

/// Anything that maps an encoder history and decoder inputs, both as raw
/// feature rows, to a horizon of label values.
pub trait HorizonModel {
    /// Confirms the model serves `spec`. Remote models handshake here.
    fn attach(&mut self, spec: &SurrogateSpec) -> Result<(), HybridError>;

    /// `time` is the timestamp of the first predicted row. `enc` holds
    /// `T_enc` feature rows, `dec` holds `T_dec`.
    fn predict(&mut self, time: f64, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>, HybridError>;
}

impl HorizonModel for Seq2SeqModel {
    fn attach(&mut self, spec: &SurrogateSpec) -> Result<(), HybridError> {
        let own = self.spec();
        if own != *spec {
            return Err(HybridError::DimMismatch(format!("model serves {own:?}, binding wants {spec:?}")));
        }
        Ok(())
    }

    fn predict(&mut self, _time: f64, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>, HybridError> {
        Ok(predict_window(self, enc, dec)?)
    }
}

impl<M: HorizonModel + ?Sized> HorizonModel for Box<M> {
    fn attach(&mut self, spec: &SurrogateSpec) -> Result<(), HybridError> {
        (**self).attach(spec)
    }

    fn predict(&mut self, time: f64, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>, HybridError> {
        (**self).predict(time, enc, dec)
    }
}

/// Test oracle that answers with the recorded label of a reference run,
/// looked up by timestamp. Beyond the record it repeats the last value.
#[derive(Debug, Clone)]
pub struct EchoOracle {
    t0: f64,
    dt: f64,
    label: Vec<f64>,
    dec_len: usize,
}

impl EchoOracle {
    pub fn new(recorded: &TimeSeriesFrame, label: &str, dec_len: usize) -> Result<Self, HybridError> {
        let dt = recorded
            .uniform_step()
            .ok_or_else(|| HybridError::ShapeMismatch("echo record is not on a uniform grid".into()))?;
        let label = recorded.column(label).map_err(|_| HybridError::UnknownTag(label.to_string()))?;
        Ok(Self {
            t0: recorded.times()[0],
            dt,
            label,
            dec_len,
        })
    }
}

impl HorizonModel for EchoOracle {
    fn attach(&mut self, spec: &SurrogateSpec) -> Result<(), HybridError> {
        if spec.dec_len != self.dec_len {
            return Err(HybridError::DimMismatch(format!(
                "echo horizon {} vs {}",
                self.dec_len, spec.dec_len
            )));
        }
        Ok(())
    }

    fn predict(&mut self, time: f64, _enc: &[f64], _dec: &[f64]) -> Result<Vec<f64>, HybridError> {
        let k = ((time - self.t0) / self.dt).round();
        if k < 0.0 {
            return Err(HybridError::ShapeMismatch(format!("echo queried before its record at t={time}")));
        }
        let last = self.label.len() - 1;
        Ok((0..self.dec_len).map(|j| self.label[(k as usize + j).min(last)]).collect())
    }
}

/// A model wired to plant tags: feature terminals in model order and the
/// state variable the label overwrites or nudges.
#[derive(Debug)]
pub struct TerminalBinding<M> {
    pub spec: SurrogateSpec,
    pub model: M,
}

impl<M> TerminalBinding<M> {
    pub fn features(&self) -> &[String] {
        &self.spec.features
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }
}

pub fn bind_surrogate<M: HorizonModel>(
    topology: &PlantTopology,
    mut model: M,
    spec: &SurrogateSpec,
) -> Result<TerminalBinding<M>, HybridError> {
    for tag in &spec.features {
        if topology.tag(tag).is_none() {
            return Err(HybridError::UnknownTag(tag.clone()));
        }
    }
    match topology.tag(&spec.label) {
        None => return Err(HybridError::UnknownTag(spec.label.clone())),
        Some(t) if !t.signal.is_writable_state() => {
            return Err(HybridError::UnknownTag(format!("{} is not a writable state variable", spec.label)))
        }
        Some(_) => {}
    }
    if spec.features.is_empty() || spec.enc_len == 0 || spec.dec_len == 0 {
        return Err(HybridError::DimMismatch(format!("degenerate spec {spec:?}")));
    }
    model.attach(spec)?;
    Ok(TerminalBinding {
        spec: spec.clone(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::build_default_plant;
    use crate::surrogate::{Dims, NormStats, Seq2SeqParams, SignalStats};

    pub(crate) fn zero_model(spec: &SurrogateSpec, hidden: usize) -> Seq2SeqModel {
        let s = |t: &str| SignalStats {
            tag: t.into(),
            mean: 45.0,
            std: 5.0,
        };
        let dims: Dims = spec.dims(hidden);
        Seq2SeqModel::new(
            dims,
            Seq2SeqParams::zeros(&dims),
            NormStats {
                features: spec.features.iter().map(|t| s(t)).collect(),
                label: s(&spec.label),
            },
        )
        .unwrap()
    }

    #[test]
    fn default_binding_is_valid() {
        let spec = SurrogateSpec::default();
        let b = bind_surrogate(&build_default_plant(), zero_model(&spec, 4), &spec).unwrap();
        assert_eq!(b.label(), "T100.T");
        assert_eq!(b.features().len(), 5);
    }

    #[test]
    fn unknown_and_read_only_tags() {
        let plant = build_default_plant();
        let mut spec = SurrogateSpec::default();
        let model = zero_model(&spec, 4);
        spec.features[0] = "T100.X".into();
        assert_eq!(bind_surrogate(&plant, model.clone(), &spec).unwrap_err().code(), "UNKNOWN_TAG");
        let spec = SurrogateSpec {
            label: "E100.Q".into(),
            ..SurrogateSpec::default()
        };
        assert_eq!(bind_surrogate(&plant, model, &spec).unwrap_err().code(), "UNKNOWN_TAG");
    }

    #[test]
    fn dims_must_agree() {
        let plant = build_default_plant();
        let spec = SurrogateSpec::default();
        let model = zero_model(&SurrogateSpec { enc_len: 20, ..spec.clone() }, 4);
        assert_eq!(bind_surrogate(&plant, model, &spec).unwrap_err().code(), "DIM_MISMATCH");
    }
}
