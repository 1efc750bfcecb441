//! Comparison metrics between a reference and a candidate label series.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::run::RunComparison;
use super::{HybridError, OSCILLATION_WINDOW};

/// Setpoint step used for rise-time measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub time: f64,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub rise_time_ref: Option<f64>,
    pub rise_time_cand: Option<f64>,
    pub oscillation_index: f64,
}

/// Time at which `y` first reaches `level` at or after row `from`, linearly
/// interpolated between samples.
fn first_crossing(times: &[f64], y: &[f64], from: usize, level: f64, rising: bool) -> Option<f64> {
    let reached = |v: f64| if rising { v >= level } else { v <= level };
    let i = (from..y.len()).find(|&i| reached(y[i]))?;
    if i == from || i == 0 || reached(y[i - 1]) {
        return Some(times[i]);
    }
    let (t0, t1, y0, y1) = (times[i - 1], times[i], y[i - 1], y[i]);
    Some(t0 + (level - y0) / (y1 - y0) * (t1 - t0))
}

/// 10 % to 90 % rise time of `y` after `event`, each level taken at its first
/// crossing.
pub fn rise_time(times: &[f64], y: &[f64], event: Option<&StepEvent>) -> Result<f64, HybridError> {
    let ev = event.ok_or(HybridError::NoStepEvent)?;
    if times.len() != y.len() {
        return Err(HybridError::ShapeMismatch(format!("{} times for {} values", times.len(), y.len())));
    }
    let rising = ev.to >= ev.from;
    let span = ev.to - ev.from;
    let start = times.partition_point(|t| *t < ev.time);
    let never = |pct: u32| HybridError::NeverCrosses(format!("series never reaches {pct}% of the step after t={}", ev.time));
    let t10 = first_crossing(times, y, start, ev.from + 0.1 * span, rising).ok_or_else(|| never(10))?;
    let from10 = times.partition_point(|t| *t < t10).saturating_sub(1).max(start);
    let t90 = first_crossing(times, y, from10, ev.from + 0.9 * span, rising).ok_or_else(|| never(90))?;
    Ok(t90 - t10)
}

/// Standard deviation of `y` minus its centered moving average over `window`
/// samples, taken where the window fits. Zero for series shorter than the
/// window.
pub fn oscillation_index(y: &[f64], window: usize) -> f64 {
    let half = window / 2;
    if window == 0 || y.len() < window {
        return 0.0;
    }
    let mut sum: f64 = y[..window].iter().sum();
    let mut resid = Vec::with_capacity(y.len() - window + 1);
    for c in half..y.len() - half {
        if c > half {
            sum += y[c + half] - y[c - half - 1];
        }
        resid.push(y[c] - sum / window as f64);
    }
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn compute_metrics(
    times: &[f64],
    reference: &[f64],
    candidate: &[f64],
    event: Option<&StepEvent>,
) -> Result<Metrics, HybridError> {
    if reference.len() != candidate.len() || times.len() != reference.len() || reference.is_empty() {
        return Err(HybridError::ShapeMismatch(format!(
            "{} times, {} reference and {} candidate values",
            times.len(),
            reference.len(),
            candidate.len()
        )));
    }
    let n = reference.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (r, c) in reference.iter().zip(candidate) {
        se += (c - r).powi(2);
        ae += (c - r).abs();
    }
    let (rise_time_ref, rise_time_cand) = match event {
        // A candidate that never completes the step has no rise time; the
        // reference must have one.
        Some(_) => (
            Some(rise_time(times, reference, event)?),
            match rise_time(times, candidate, event) {
                Err(HybridError::NeverCrosses(_)) => None,
                r => Some(r?),
            },
        ),
        None => (None, None),
    };
    Ok(Metrics {
        rmse: (se / n).sqrt(),
        mae: ae / n,
        rise_time_ref,
        rise_time_cand,
        oscillation_index: oscillation_index(candidate, OSCILLATION_WINDOW),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preference {
    First,
    Second,
    Tie,
}

/// Metric deltas, first minus second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub first: Metrics,
    pub second: Metrics,
    pub delta_rmse: f64,
    pub delta_mae: f64,
    pub delta_oscillation: f64,
    pub preferred: Preference,
}

pub fn compare_runs(a: &RunComparison, b: &RunComparison) -> Result<Ranking, HybridError> {
    if a.reference != b.reference {
        return Err(HybridError::ReferenceMismatch(
            "runs were scored against different reference frames".into(),
        ));
    }
    let delta_rmse = a.metrics.rmse - b.metrics.rmse;
    let preferred = if delta_rmse.abs() < 1e-12 {
        Preference::Tie
    } else if delta_rmse < 0.0 {
        Preference::First
    } else {
        Preference::Second
    };
    Ok(Ranking {
        first: a.metrics.clone(),
        second: b.metrics.clone(),
        delta_rmse,
        delta_mae: a.metrics.mae - b.metrics.mae,
        delta_oscillation: a.metrics.oscillation_index - b.metrics.oscillation_index,
        preferred,
    })
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        writeln!(f, "{:<20} {:>12} {:>12} {:>12}", "metric", "first", "second", "delta")?;
        for (name, x, y) in [
            ("rmse [K]", self.first.rmse, self.second.rmse),
            ("mae [K]", self.first.mae, self.second.mae),
            ("oscillation [K]", self.first.oscillation_index, self.second.oscillation_index),
        ] {
            writeln!(f, "{name:<20} {x:>12.6} {y:>12.6} {:>12.6}", x - y)?;
        }
        writeln!(
            f,
            "{:<20} {:>12} {:>12}",
            "rise ref [s]",
            opt(self.first.rise_time_ref),
            opt(self.second.rise_time_ref)
        )?;
        writeln!(
            f,
            "{:<20} {:>12} {:>12}",
            "rise cand [s]",
            opt(self.first.rise_time_cand),
            opt(self.second.rise_time_cand)
        )?;
        let verdict = match self.preferred {
            Preference::First => "first preferred",
            Preference::Second => "second preferred",
            Preference::Tie => "tie",
        };
        write!(f, "{verdict}")
    }
}
