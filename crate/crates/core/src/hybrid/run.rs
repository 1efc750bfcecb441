//! Open-loop, replacement and tracking runs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::binding::{HorizonModel, TerminalBinding};
use super::metrics::{compute_metrics, Metrics, StepEvent};
use super::HybridError;
use crate::historian::TimeSeriesFrame;
use crate::plant::{run_scenario, PlantState, PlantTopology, ScenarioSchedule, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    OpenLoop,
    Replace,
    Track,
}

impl FromStr for HybridMode {
    type Err = HybridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "open_loop" | "open-loop" | "openloop" => Ok(Self::OpenLoop),
            "replace" => Ok(Self::Replace),
            "track" => Ok(Self::Track),
            other => Err(HybridError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub mode: HybridMode,
    /// Tracking gain, required in TRACK mode.
    pub alpha: Option<f64>,
    /// Couple every `cadence` steps.
    pub cadence: usize,
    /// Step used for rise times in the comparison.
    pub step_event: Option<StepEvent>,
}

impl HybridConfig {
    pub fn new(mode: HybridMode) -> Self {
        Self {
            mode,
            alpha: None,
            cadence: 1,
            step_event: None,
        }
    }

    pub fn track(alpha: f64) -> Self {
        Self {
            alpha: Some(alpha),
            ..Self::new(HybridMode::Track)
        }
    }

    fn validate(&self) -> Result<(), HybridError> {
        if self.cadence == 0 {
            return Err(HybridError::InvalidConfig("cadence must be at least 1".into()));
        }
        match (self.mode, self.alpha) {
            (HybridMode::Track, None) => Err(HybridError::TrackWithoutGain),
            (_, Some(a)) if !(0.0..=1.0).contains(&a) => Err(HybridError::GainRange(a)),
            _ => Ok(()),
        }
    }
}

/// Reference and candidate label series on a shared grid, with metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunComparison {
    pub reference: TimeSeriesFrame,
    pub candidate: TimeSeriesFrame,
    pub metrics: Metrics,
}

impl RunComparison {
    fn new(
        label: &str,
        times: &[f64],
        reference: Vec<f64>,
        candidate: Vec<f64>,
        event: Option<&StepEvent>,
    ) -> Result<Self, HybridError> {
        let metrics = compute_metrics(times, &reference, &candidate, event)?;
        let frame = |v: Vec<f64>| {
            TimeSeriesFrame::from_columns(times.to_vec(), vec![(label.to_string(), v)])
                .map_err(|e| HybridError::ShapeMismatch(e.to_string()))
        };
        Ok(Self {
            reference: frame(reference)?,
            candidate: frame(candidate)?,
            metrics,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridRun {
    /// Pure physics run of the same scenario.
    pub reference: TimeSeriesFrame,
    /// Coupled run, same tags and grid as `reference`.
    pub hybrid: TimeSeriesFrame,
    pub comparison: RunComparison,
}

/// Proportional relaxation of a state value towards a prediction.
pub fn nudge_state(x: f64, prediction: f64, alpha: f64) -> Result<f64, HybridError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(HybridError::GainRange(alpha));
    }
    Ok(x + alpha * (prediction - x))
}

fn columns(frame: &TimeSeriesFrame, tags: &[String]) -> Result<Vec<usize>, HybridError> {
    tags.iter()
        .map(|t| frame.tag_index(t).ok_or_else(|| HybridError::UnknownTag(t.clone())))
        .collect()
}

fn gather(values: &[f64], width: usize, cols: &[usize], rows: std::ops::Range<usize>, out: &mut Vec<f64>) {
    out.clear();
    for r in rows {
        let row = &values[r * width..(r + 1) * width];
        out.extend(cols.iter().map(|&c| row[c]));
    }
}

/// Rolls the bound model over recorded features, re-anchoring the encoder
/// every `T_dec` rows, and scores the predicted label against the recorded
/// one from row `T_enc` on. Plant state is never touched.
pub fn run_open_loop<M: HorizonModel>(
    binding: &mut TerminalBinding<M>,
    recorded: &TimeSeriesFrame,
    event: Option<&StepEvent>,
) -> Result<RunComparison, HybridError> {
    let (te, td) = (binding.spec.enc_len, binding.spec.dec_len);
    if recorded.len() <= te {
        return Err(HybridError::FrameTooShort {
            len: recorded.len(),
            need: te + 1,
        });
    }
    if recorded.uniform_step().is_none() {
        return Err(HybridError::Surrogate(crate::surrogate::SurrogateError::NotFixedGrid(
            "recorded frame is not on a uniform grid".into(),
        )));
    }
    let cols = columns(recorded, &binding.spec.features)?;
    let label = recorded
        .tag_index(&binding.spec.label)
        .ok_or_else(|| HybridError::UnknownTag(binding.spec.label.clone()))?;
    let (w, f) = (recorded.width(), cols.len());
    let values = recorded.values();
    let times = recorded.times();
    let (mut enc, mut dec) = (Vec::new(), Vec::new());
    let mut y = Vec::with_capacity(recorded.len() - te);
    let mut a = te;
    while a < recorded.len() {
        let end = (a + td).min(recorded.len());
        gather(values, w, &cols, a - te..a, &mut enc);
        gather(values, w, &cols, a..end, &mut dec);
        let last = dec[dec.len() - f..].to_vec();
        while dec.len() < td * f {
            dec.extend_from_slice(&last);
        }
        let block = binding.model.predict(times[a], &enc, &dec)?;
        if block.len() != td {
            return Err(HybridError::ShapeMismatch(format!("model returned {} values for T_dec={td}", block.len())));
        }
        y.extend_from_slice(&block[..end - a]);
        a = end;
    }
    let reference = recorded.column_at(label)[te..].to_vec();
    RunComparison::new(&binding.spec.label, &times[te..], reference, y, event)
}

/// Runs `scenario` twice, as pure physics and coupled to the bound model.
///
/// From row `T_enc` on, every `cadence` steps the model predicts the label
/// for the row just stepped from the last `T_enc` recorded feature rows and
/// the current one (held over the horizon, only the first value is used).
/// REPLACE overwrites the physics value, TRACK nudges it by `alpha`.
pub fn run_hybrid<M: HorizonModel>(
    topology: &PlantTopology,
    binding: &mut TerminalBinding<M>,
    config: &HybridConfig,
    scenario: &ScenarioSchedule,
    initial: &PlantState,
) -> Result<HybridRun, HybridError> {
    config.validate()?;
    let event = config.step_event.as_ref();
    let reference = run_scenario(topology, scenario, initial)?;
    let label_col = reference
        .tag_index(&binding.spec.label)
        .ok_or_else(|| HybridError::UnknownTag(binding.spec.label.clone()))?;

    if config.mode == HybridMode::OpenLoop {
        let comparison = run_open_loop(binding, &reference, event)?;
        let mut hybrid = reference.clone();
        let y = comparison.candidate.column_at(0);
        let offset = reference.len() - y.len();
        for (i, v) in y.into_iter().enumerate() {
            hybrid.set_value(offset + i, label_col, v);
        }
        return Ok(HybridRun {
            reference,
            hybrid,
            comparison,
        });
    }

    let (te, td) = (binding.spec.enc_len, binding.spec.dec_len);
    let stepper = Stepper::new(topology, scenario, initial.time)?;
    let tags = stepper.tags();
    let w = tags.len();
    let cols = columns(&reference, &binding.spec.features)?;
    let n = stepper.steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity((n + 1) * w);
    let (mut row, mut enc, mut dec) = (Vec::with_capacity(w), Vec::new(), Vec::new());

    let mut state = initial.clone();
    times.push(state.time);
    stepper.record(&state, &mut values);
    for k in 1..=n {
        state = stepper.advance(&state, k)?;
        if k >= te && (k - te) % config.cadence == 0 {
            row.clear();
            stepper.record(&state, &mut row);
            gather(&values, w, &cols, k - te..k, &mut enc);
            dec.clear();
            for _ in 0..td {
                dec.extend(cols.iter().map(|&c| row[c]));
            }
            let y = binding.model.predict(state.time, &enc, &dec)?;
            let y0 = *y
                .first()
                .ok_or_else(|| HybridError::ShapeMismatch("model returned no prediction".into()))?;
            let x = state.read(topology, &binding.spec.label)?;
            let next = match config.mode {
                HybridMode::Replace => y0,
                _ => nudge_state(x, y0, config.alpha.unwrap_or(0.0))?,
            };
            state.write(topology, &binding.spec.label, next)?;
        }
        times.push(state.time);
        stepper.record(&state, &mut values);
    }
    let hybrid = TimeSeriesFrame::new(tags, times, values).map_err(|e| HybridError::ShapeMismatch(e.to_string()))?;
    let comparison = RunComparison::new(
        &binding.spec.label,
        reference.times(),
        reference.column_at(label_col),
        hybrid.column_at(label_col),
        event,
    )?;
    Ok(HybridRun {
        reference,
        hybrid,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{bind_surrogate, EchoOracle};
    use crate::plant::{build_default_plant, default_scenario, steady_state};
    use crate::surrogate::{Dims, NormStats, Seq2SeqModel, Seq2SeqParams, SignalStats, SurrogateSpec};

    fn setup() -> (PlantTopology, ScenarioSchedule, PlantState) {
        let plant = build_default_plant();
        let sc = default_scenario();
        let (sp, ov) = sc.initial_values();
        let s0 = steady_state(&plant, &sp, &ov).unwrap();
        (plant, sc, s0)
    }

    fn small_spec() -> SurrogateSpec {
        SurrogateSpec {
            enc_len: 8,
            dec_len: 4,
            ..SurrogateSpec::default()
        }
    }

    fn random_model(spec: &SurrogateSpec, mean: f64) -> Seq2SeqModel {
        let d: Dims = spec.dims(4);
        let s = |t: &str, m: f64, sd: f64| SignalStats {
            tag: t.into(),
            mean: m,
            std: sd,
        };
        Seq2SeqModel::new(
            d,
            Seq2SeqParams::init(&d, 5),
            NormStats {
                features: spec.features.iter().map(|t| s(t, 0.5, 0.3)).collect(),
                label: s(&spec.label, mean, 4.0),
            },
        )
        .unwrap()
    }

    #[test]
    fn nudge_examples() {
        assert_eq!(nudge_state(20.0, 22.0, 0.5).unwrap(), 21.0);
        assert_eq!(nudge_state(20.0, 22.0, 1.0).unwrap(), 22.0);
        assert_eq!(nudge_state(20.0, 22.0, 0.0).unwrap(), 20.0);
        assert_eq!(nudge_state(20.0, 22.0, 1.5).unwrap_err().code(), "GAIN_RANGE");
        assert_eq!(nudge_state(20.0, 22.0, -0.1).unwrap_err().code(), "GAIN_RANGE");
    }

    #[test]
    fn echo_open_loop_is_exact() {
        let (plant, sc, s0) = setup();
        let rec = run_scenario(&plant, &sc, &s0).unwrap();
        let spec = small_spec();
        let echo = EchoOracle::new(&rec, "T100.T", spec.dec_len).unwrap();
        let mut b = bind_surrogate(&plant, echo, &spec).unwrap();
        let c = run_open_loop(&mut b, &rec, None).unwrap();
        assert_eq!(c.metrics.rmse, 0.0);
        assert_eq!(c.candidate.len(), rec.len() - spec.enc_len);
    }

    #[test]
    fn zero_model_rmse_is_label_spread() {
        let (plant, sc, s0) = setup();
        let rec = run_scenario(&plant, &sc, &s0).unwrap();
        let spec = small_spec();
        let mut m = random_model(&spec, 45.0);
        m.params.fill(0.0);
        let mut b = bind_surrogate(&plant, m, &spec).unwrap();
        let c = run_open_loop(&mut b, &rec, None).unwrap();
        let y = &rec.column("T100.T").unwrap()[spec.enc_len..];
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        let rmse_about_45 = (y.iter().map(|v| (v - 45.0).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!((c.metrics.rmse - rmse_about_45).abs() < 1e-9);
        // With the label mean set to the sample mean the identity is exact.
        let mut m = random_model(&spec, mean);
        m.params.fill(0.0);
        let mut b = bind_surrogate(&plant, m, &spec).unwrap();
        let c = run_open_loop(&mut b, &rec, None).unwrap();
        assert!((c.metrics.rmse - sd).abs() < 1e-9);
    }

    #[test]
    fn track_zero_gain_is_pure_physics() {
        let (plant, sc, s0) = setup();
        let spec = small_spec();
        let mut b = bind_surrogate(&plant, random_model(&spec, 45.0), &spec).unwrap();
        let run = run_hybrid(&plant, &mut b, &HybridConfig::track(0.0), &sc, &s0).unwrap();
        assert_eq!(run.hybrid, run.reference);
        assert_eq!(run.comparison.metrics.rmse, 0.0);

        let run = run_hybrid(&plant, &mut b, &HybridConfig::track(0.3), &sc, &s0).unwrap();
        assert_ne!(run.hybrid, run.reference);
        let t = run.hybrid.column("T100.T").unwrap();
        assert_eq!(&t[..spec.enc_len], &run.reference.column("T100.T").unwrap()[..spec.enc_len]);
    }

    #[test]
    fn replace_with_echo_reproduces_reference() {
        let (plant, sc, s0) = setup();
        let rec = run_scenario(&plant, &sc, &s0).unwrap();
        let spec = small_spec();
        let echo = EchoOracle::new(&rec, "T100.T", spec.dec_len).unwrap();
        let mut b = bind_surrogate(&plant, echo, &spec).unwrap();
        let run = run_hybrid(&plant, &mut b, &HybridConfig::new(HybridMode::Replace), &sc, &s0).unwrap();
        assert!(run.comparison.metrics.rmse <= 1e-12);
        assert_eq!(run.hybrid, run.reference);
    }

    #[test]
    fn replace_changes_the_closed_loop() {
        let (plant, sc, s0) = setup();
        let spec = small_spec();
        let mut b = bind_surrogate(&plant, random_model(&spec, 45.0), &spec).unwrap();
        let cfg = HybridConfig {
            cadence: 5,
            ..HybridConfig::new(HybridMode::Replace)
        };
        let run = run_hybrid(&plant, &mut b, &cfg, &sc, &s0).unwrap();
        let heater_ref = run.reference.column("E100.u").unwrap();
        let heater_hyb = run.hybrid.column("E100.u").unwrap();
        assert_ne!(heater_ref, heater_hyb);
        assert_eq!(run.hybrid.len(), 3001);
    }

    #[test]
    fn open_loop_mode_keeps_physics_features() {
        let (plant, sc, s0) = setup();
        let spec = small_spec();
        let mut b = bind_surrogate(&plant, random_model(&spec, 45.0), &spec).unwrap();
        let run = run_hybrid(&plant, &mut b, &HybridConfig::new(HybridMode::OpenLoop), &sc, &s0).unwrap();
        assert_eq!(run.hybrid.column("E100.u").unwrap(), run.reference.column("E100.u").unwrap());
        assert_eq!(run.comparison.candidate.len(), 3001 - spec.enc_len);
    }

    #[test]
    fn config_errors() {
        let (plant, sc, s0) = setup();
        let spec = small_spec();
        let mut b = bind_surrogate(&plant, random_model(&spec, 45.0), &spec).unwrap();
        let e = run_hybrid(&plant, &mut b, &HybridConfig::new(HybridMode::Track), &sc, &s0).unwrap_err();
        assert_eq!(e.code(), "TRACK_WITHOUT_GAIN");
        let e = run_hybrid(&plant, &mut b, &HybridConfig::track(2.0), &sc, &s0).unwrap_err();
        assert_eq!(e.code(), "GAIN_RANGE");
        let short = run_scenario(&plant, &sc, &s0).unwrap().slice_rows(0, 8);
        assert_eq!(run_open_loop(&mut b, &short, None).unwrap_err().code(), "FRAME_TOO_SHORT");
        assert_eq!("track".parse::<HybridMode>().unwrap(), HybridMode::Track);
        assert!("bogus".parse::<HybridMode>().is_err());
    }
}
