//! Irregular-sampling emulation and resampling onto a fixed grid.

use super::{HistorianError, TimeSeriesFrame};
use crate::rng::SplitMix64;

/// Fixed sampling grid `t0 + k * dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self, HistorianError> {
        if !(dt > 0.0) || n == 0 || !t0.is_finite() {
            return Err(HistorianError::FrameInvalid(format!("invalid grid t0={t0} dt={dt} n={n}")));
        }
        Ok(Self { t0, dt, n })
    }

    /// Longest grid with spacing `dt` starting at the frame's first sample
    /// that stays inside the frame's time span.
    pub fn covering(frame: &TimeSeriesFrame, dt: f64) -> Result<Self, HistorianError> {
        let (first, last) = match (frame.times().first(), frame.times().last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(HistorianError::FrameInvalid("empty frame".into())),
        };
        let n = ((last - first) / dt + 1e-9).floor() as usize + 1;
        Self::new(first, dt, n)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.time(k)).collect()
    }
}

/// Linear interpolation of column `col` at time `t`, exact when `t` hits a
/// sample. `t` must lie inside the frame's span.
fn interpolate_row(frame: &TimeSeriesFrame, t: f64, out: &mut Vec<f64>) {
    let times = frame.times();
    match times.binary_search_by(|x| x.partial_cmp(&t).expect("finite times")) {
        Ok(i) => out.extend_from_slice(frame.row(i)),
        Err(i) => {
            let i = i.clamp(1, times.len() - 1);
            let (ta, tb) = (times[i - 1], times[i]);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            let (ra, rb) = (frame.row(i - 1), frame.row(i));
            out.extend(ra.iter().zip(rb).map(|(a, b)| a + (b - a) * w));
        }
    }
}

fn check_span(frame: &TimeSeriesFrame, grid: &GridSpec) -> Result<(), HistorianError> {
    let times = frame.times();
    let (first, last) = match (times.first(), times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (f64::NAN, f64::NAN),
    };
    let tol = 1e-9 * grid.dt;
    if !(grid.t0 >= first - tol && grid.end() <= last + tol) {
        return Err(HistorianError::GridOutOfRange {
            grid_start: grid.t0,
            grid_end: grid.end(),
            data_start: first,
            data_end: last,
        });
    }
    Ok(())
}

fn sample_at(frame: &TimeSeriesFrame, times: Vec<f64>) -> TimeSeriesFrame {
    let mut values = Vec::with_capacity(times.len() * frame.width());
    for &t in &times {
        interpolate_row(frame, t, &mut values);
    }
    TimeSeriesFrame::new(frame.tags().to_vec(), times, values).expect("interpolated frame is valid")
}

/// Per-tag linear interpolation onto `grid`.
pub fn resample_fixed_grid(frame: &TimeSeriesFrame, grid: &GridSpec) -> Result<TimeSeriesFrame, HistorianError> {
    check_span(frame, grid)?;
    Ok(sample_at(frame, grid.times()))
}

/// Re-samples a uniformly gridded frame at instants whose consecutive gaps are
/// drawn i.i.d. uniform from `[lo, hi]`, starting at the first sample and
/// stopping before the last one is exceeded.
pub fn jitter_timestamps(frame: &TimeSeriesFrame, lo: f64, hi: f64, seed: u64) -> Result<TimeSeriesFrame, HistorianError> {
    if !(lo > 0.0) || !(lo <= hi) || !hi.is_finite() {
        return Err(HistorianError::JitterBounds { lo, hi });
    }
    if frame.len() < 2 {
        return Ok(frame.clone());
    }
    let dt = frame
        .uniform_step()
        .ok_or_else(|| HistorianError::NotFixedGrid("jitter input must be on a uniform grid".into()))?;
    if hi > dt * (1.0 + 1e-9) {
        return Err(HistorianError::NotFixedGrid(format!("grid step {dt} is finer than hi={hi}")));
    }
    let first = frame.times()[0];
    let last = frame.times()[frame.len() - 1];
    let mut rng = SplitMix64::new(seed);
    let mut times = vec![first];
    let mut t = first;
    loop {
        t += rng.uniform(lo, hi);
        if t > last {
            break;
        }
        times.push(t);
    }
    Ok(sample_at(frame, times))
}

/// Resamples every frame to `grid` and joins their columns in order.
pub fn align_to_frame(frames: &[TimeSeriesFrame], grid: &GridSpec) -> Result<TimeSeriesFrame, HistorianError> {
    let mut tags: Vec<String> = Vec::new();
    for f in frames {
        for tag in f.tags() {
            if tags.contains(tag) {
                return Err(HistorianError::TagCollision(tag.clone()));
            }
            tags.push(tag.clone());
        }
    }
    let resampled = frames
        .iter()
        .map(|f| resample_fixed_grid(f, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut values = Vec::with_capacity(grid.n * tags.len());
    for i in 0..grid.n {
        for f in &resampled {
            values.extend_from_slice(f.row(i));
        }
    }
    TimeSeriesFrame::new(tags, grid.times(), values)
}
