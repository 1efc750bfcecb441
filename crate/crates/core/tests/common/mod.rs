//! Oracles shared by the integration tests. They work from recorded frames
//! only, never from simulator internals.

#![allow(dead_code)]

use hytwin_core::historian::TimeSeriesFrame;
use hytwin_core::plant::{
    build_default_plant, reference_scenario, run_scenario, steady_state, Disturbances, PlantTopology, SetpointStep,
    CP, RHO,
};
use hytwin_core::ScenarioSchedule;

pub const TANK_AREA: f64 = 0.2;

pub fn col(frame: &TimeSeriesFrame, tag: &str) -> Vec<f64> {
    frame.column(tag).unwrap()
}

pub fn masses(frame: &TimeSeriesFrame) -> Vec<f64> {
    col(frame, "T100.level").iter().map(|l| l * RHO * TANK_AREA).collect()
}

/// (recorded change, integrated net inflow, scale) for the tank mass.
pub fn mass_balance(frame: &TimeSeriesFrame) -> (f64, f64, f64) {
    let m = masses(frame);
    let (pin, pout) = (col(frame, "P100.mdot"), col(frame, "V106.mdot"));
    let t = frame.times();
    let (mut net, mut through) = (0.0, 0.0);
    for k in 1..t.len() {
        let dt = t[k] - t[k - 1];
        net += (pin[k] - pout[k]) * dt;
        through += (pin[k] + pout[k]) * dt;
    }
    (m[m.len() - 1] - m[0], net, m[0] + through)
}

/// (recorded change of M·cp·T, integrated heat and enthalpy flows, scale).
/// Outflow leaves at the temperature the tank had at the start of the step.
pub fn energy_balance(frame: &TimeSeriesFrame) -> (f64, f64, f64) {
    let m = masses(frame);
    let temp = col(frame, "T100.T");
    let (q, tin) = (col(frame, "E100.Q"), col(frame, "SRC.Tin"));
    let (pin, pout) = (col(frame, "P100.mdot"), col(frame, "V106.mdot"));
    let t = frame.times();
    let (mut sum, mut scale) = (0.0, 0.0);
    for k in 1..t.len() {
        let dt = t[k] - t[k - 1];
        let terms = [q[k], pin[k] * CP * tin[k], -pout[k] * CP * temp[k - 1]];
        sum += terms.iter().sum::<f64>() * dt;
        scale += terms.iter().map(|x| x.abs()).sum::<f64>() * dt;
    }
    let e = |k: usize| m[k] * CP * temp[k];
    let n = t.len() - 1;
    (e(n) - e(0), sum, e(0).abs() + scale)
}

pub fn run(plant: &PlantTopology, sc: &ScenarioSchedule) -> TimeSeriesFrame {
    let (sp, ov) = sc.initial_values();
    run_scenario(plant, sc, &steady_state(plant, &sp, &ov).unwrap()).unwrap()
}

pub fn step_scenario(initial: f64, target: f64, at: f64, duration: f64) -> ScenarioSchedule {
    reference_scenario(duration, SetpointStep { initial, target, at }, &Disturbances::excitation(7, duration))
}

pub fn default_run() -> TimeSeriesFrame {
    run(&build_default_plant(), &step_scenario(40.0, 50.0, 1000.0, 3000.0))
}

pub fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// 10-90 % rise time after `at` by linear interpolation of first crossings.
pub fn rise_time(t: &[f64], y: &[f64], at: f64, from: f64, to: f64) -> Option<f64> {
    let up = to > from;
    let cross = |lvl: f64| {
        (1..t.len()).find(|&i| t[i] >= at && if up { y[i] >= lvl } else { y[i] <= lvl }).map(|i| {
            let (ta, tb, ya, yb) = (t[i - 1], t[i], y[i - 1], y[i]);
            if yb == ya || t[i - 1] < at {
                tb
            } else {
                ta + (lvl - ya) / (yb - ya) * (tb - ta)
            }
        })
    };
    Some(cross(from + 0.9 * (to - from))? - cross(from + 0.1 * (to - from))?)
}
