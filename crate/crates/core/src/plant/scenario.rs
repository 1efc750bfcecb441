use std::collections::BTreeMap;

use super::sim::StepInputs;
use super::PlantError;
use crate::historian::TimeSeriesFrame;
use crate::rng::SplitMix64;

/// Constant `value` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Piecewise-constant setpoints (keyed by loop setpoint name) and actuator
/// overrides (keyed by tag) over `[0, duration]`, stepped at `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSchedule {
    pub duration: f64,
    pub dt: f64,
    pub setpoints: BTreeMap<String, Vec<Segment>>,
    pub overrides: BTreeMap<String, Vec<Segment>>,
}

fn lookup(segments: &[Segment], t: f64) -> f64 {
    let i = segments.partition_point(|s| s.start <= t);
    segments[i.saturating_sub(1)].value
}

fn check_cover(name: &str, segments: &[Segment], duration: f64) -> Result<(), PlantError> {
    let err = |msg: &str| Err(PlantError::ScenarioInvalid(format!("{name}: {msg}")));
    let (Some(first), Some(last)) = (segments.first(), segments.last()) else {
        return err("no segments");
    };
    if first.start != 0.0 {
        return err("first segment must start at 0");
    }
    if last.end < duration {
        return err("segments end before the scenario does");
    }
    for s in segments {
        if !(s.end > s.start) || !s.value.is_finite() {
            return err("empty or non-finite segment");
        }
    }
    if segments.windows(2).any(|w| w[0].end != w[1].start) {
        return err("segments must be contiguous and non-overlapping");
    }
    Ok(())
}

impl ScenarioSchedule {
    pub fn new(duration: f64, dt: f64) -> Self {
        Self {
            duration,
            dt,
            setpoints: BTreeMap::new(),
            overrides: BTreeMap::new(),
        }
    }

    /// Piecewise-constant schedule from `(switch time, value)` pairs; the
    /// first pair must start at 0.
    pub fn steps(&self, points: &[(f64, f64)]) -> Vec<Segment> {
        let end = self.duration.max(self.dt) + self.dt;
        points
            .iter()
            .enumerate()
            .map(|(i, &(start, value))| Segment {
                start,
                end: points.get(i + 1).map_or(end, |p| p.0),
                value,
            })
            .collect()
    }

    pub fn with_setpoint(mut self, key: &str, points: &[(f64, f64)]) -> Self {
        let segs = self.steps(points);
        self.setpoints.insert(key.to_string(), segs);
        self
    }

    pub fn with_override(mut self, tag: &str, points: &[(f64, f64)]) -> Self {
        let segs = self.steps(points);
        self.overrides.insert(tag.to_string(), segs);
        self
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(PlantError::ScenarioInvalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(PlantError::ScenarioInvalid(format!("invalid duration {}", self.duration)));
        }
        for (k, s) in self.setpoints.iter().chain(&self.overrides) {
            check_cover(k, s, self.duration)?;
        }
        Ok(())
    }

    /// Number of fixed steps, `ceil(duration / dt)`.
    pub fn step_count(&self) -> usize {
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Setpoints and overrides in force at scenario time `t`.
    pub fn inputs_at(&self, t: f64) -> StepInputs {
        StepInputs {
            setpoints: self.setpoints.iter().map(|(k, s)| (k.clone(), lookup(s, t))).collect(),
            overrides: self.overrides.iter().map(|(k, s)| (k.clone(), lookup(s, t))).collect(),
        }
    }

    /// Setpoints and overrides at `t = 0`, as maps.
    pub fn initial_values(&self) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
        let inputs = self.inputs_at(0.0);
        (inputs.setpoints, inputs.overrides)
    }
}

/// Temperature setpoint step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetpointStep {
    pub initial: f64,
    pub target: f64,
    pub at: f64,
}

/// Open-loop excitation applied on top of the setpoint schedule: load changes
/// on the outlet valve and changes in supply water temperature, as
/// `(time, value)` breakpoints starting at 0. Without them the flow and supply
/// signals would be constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbances {
    pub level_setpoint: f64,
    pub valve: Vec<(f64, f64)>,
    pub supply: Vec<(f64, f64)>,
}

impl Default for Disturbances {
    fn default() -> Self {
        Self::excitation(DISTURBANCE_SEED, 3000.0)
    }
}

const LEVEL: f64 = 0.025;
const DISTURBANCE_SEED: u64 = 7;
const VALVE_HOLD: f64 = 80.0;
const SUPPLY_HOLD: f64 = 130.0;

impl Disturbances {
    /// Seeded piecewise-constant excitation over `duration`: valve opening in
    /// [0.15, 0.40] held for 80 s, supply temperature in [8, 20] °C held for
    /// 130 s. The different hold times make the combinations vary, and the
    /// wide ranges drive the heater into saturation now and then, so the tank
    /// temperature also visits values away from the setpoint.
    pub fn excitation(seed: u64, duration: f64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut valve = vec![(0.0, 0.25)];
        let mut t = VALVE_HOLD;
        while t < duration {
            valve.push((t, rng.uniform(0.15, 0.40)));
            t += VALVE_HOLD;
        }
        let mut supply = vec![(0.0, 15.0)];
        let mut t = SUPPLY_HOLD;
        while t < duration {
            supply.push((t, rng.uniform(8.0, 20.0)));
            t += SUPPLY_HOLD;
        }
        Self {
            level_setpoint: LEVEL,
            valve,
            supply,
        }
    }
}

/// Set-point change scenario for the default plant at `dt = 1 s`.
pub fn reference_scenario(duration: f64, step: SetpointStep, disturbances: &Disturbances) -> ScenarioSchedule {
    let within = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        pts.iter().copied().filter(|(t, _)| *t == 0.0 || (*t > 0.0 && *t < duration)).collect()
    };
    let temp = if step.at > 0.0 && step.at < duration {
        vec![(0.0, step.initial), (step.at, step.target)]
    } else {
        vec![(0.0, step.initial)]
    };
    ScenarioSchedule::new(duration, 1.0)
        .with_setpoint("T100.T", &temp)
        .with_setpoint("T100.level", &[(0.0, disturbances.level_setpoint)])
        .with_override("V106.u", &within(&disturbances.valve))
        .with_override("SRC.Tin", &within(&disturbances.supply))
}

/// 3000 s run with the temperature setpoint stepping 40 -> 50 °C at 1000 s.
pub fn default_scenario() -> ScenarioSchedule {
    reference_scenario(
        3000.0,
        SetpointStep {
            initial: 40.0,
            target: 50.0,
            at: 1000.0,
        },
        &Disturbances::default(),
    )
}

/// Overrides that replay recorded actuator signals: the value recorded at
/// row `k` drives the step that produces row `k`.
pub fn replay_overrides(frame: &TimeSeriesFrame, tags: &[&str]) -> Result<BTreeMap<String, Vec<Segment>>, PlantError> {
    let t0 = *frame
        .times()
        .first()
        .ok_or_else(|| PlantError::ScenarioInvalid("empty replay frame".into()))?;
    let mut out = BTreeMap::new();
    for tag in tags {
        let col = frame.column(tag).map_err(|_| PlantError::UnknownTag(tag.to_string()))?;
        let times = frame.times();
        let mut segs = Vec::with_capacity(col.len());
        segs.push(Segment {
            start: 0.0,
            end: times.get(1).map_or(f64::INFINITY, |t| t - t0),
            value: col.get(1).copied().unwrap_or(col[0]),
        });
        for k in 2..col.len() {
            segs.push(Segment {
                start: times[k - 1] - t0,
                end: times[k] - t0,
                value: col[k],
            });
        }
        if let Some(last) = segs.last_mut() {
            last.end = f64::INFINITY;
        }
        out.insert(tag.to_string(), segs);
    }
    Ok(out)
}
