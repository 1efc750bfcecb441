use std::collections::BTreeMap;

use super::control::pi_update;
use super::scenario::ScenarioSchedule;
use super::topology::{resolve_path, ComponentKind, PiLoopSpec, PlantTopology, Signal};
use super::{PlantError, CP, MIN_MASS, RHO, T_AMBIENT};
use crate::historian::TimeSeriesFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankState {
    /// kg
    pub mass: f64,
    /// °C
    pub temp: f64,
}

/// Mass flows over the most recent step, kg/s.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Flows {
    pub pump: f64,
    pub valve: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// Simulation clock, s.
    pub time: f64,
    pub tank: TankState,
    /// Delivered heater power, W.
    pub heater_power: f64,
    pub heater_cmd: f64,
    pub pump_cmd: f64,
    pub valve_cmd: f64,
    /// Supply water temperature, °C.
    pub supply_temp: f64,
    pub flows: Flows,
    /// One accumulator per control loop, in topology order.
    pub integrals: Vec<f64>,
    /// Number of times a value had to be clamped back into its valid range.
    pub clamp_events: u64,
}

/// Setpoints keyed by loop setpoint name, overrides keyed by actuator tag.
/// An override on a loop's actuator puts that loop in manual.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInputs {
    pub setpoints: BTreeMap<String, f64>,
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
struct ResolvedLoop {
    spec: PiLoopSpec,
    measured: Signal,
    actuator: Signal,
}

/// Topology flattened into the numbers the integrator needs.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    supply_temp: f64,
    pump_max: f64,
    area: f64,
    max_level: f64,
    ua: f64,
    heater_max: f64,
    heater_tau: f64,
    valve_max: f64,
    tags: Vec<Signal>,
    loops: Vec<ResolvedLoop>,
}

#[derive(Debug, Clone, Default)]
struct Drives {
    setpoints: Vec<f64>,
    heater: Option<f64>,
    pump: Option<f64>,
    valve: Option<f64>,
    supply: Option<f64>,
}

impl Resolved {
    pub(crate) fn new(topology: &PlantTopology) -> Result<Self, PlantError> {
        let path = resolve_path(topology)?;
        let kind = |i: usize| &topology.components[i].kind;
        let (&ComponentKind::Source { supply_temp }, &ComponentKind::Pump { max_flow: pump_max }) =
            (kind(path.source), kind(path.pump))
        else {
            unreachable!("flow path resolved by kind")
        };
        let &ComponentKind::Tank { area, max_level, ua } = kind(path.tank) else {
            unreachable!()
        };
        let &ComponentKind::Heater {
            max_power,
            time_constant,
            ..
        } = kind(path.heater)
        else {
            unreachable!()
        };
        let &ComponentKind::Valve { max_flow: valve_max } = kind(path.valve) else {
            unreachable!()
        };
        let signal = |name: &str| {
            topology
                .tag(name)
                .map(|t| t.signal)
                .ok_or_else(|| PlantError::UnknownTag(name.to_string()))
        };
        let loops = topology
            .control_loops
            .iter()
            .map(|l| {
                let actuator = signal(&l.actuated)?;
                if !actuator.is_actuator() {
                    return Err(PlantError::InvalidTopology(format!("{} is not an actuator", l.actuated)));
                }
                Ok(ResolvedLoop {
                    spec: l.clone(),
                    measured: signal(&l.measured)?,
                    actuator,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            supply_temp,
            pump_max,
            area,
            max_level,
            ua,
            heater_max: max_power,
            heater_tau: time_constant,
            valve_max,
            tags: topology.tags.iter().map(|t| t.signal).collect(),
            loops,
        })
    }

    fn max_mass(&self) -> f64 {
        RHO * self.area * self.max_level
    }

    pub(crate) fn read(&self, state: &PlantState, signal: Signal) -> f64 {
        match signal {
            Signal::TankTemperature => state.tank.temp,
            Signal::TankLevel => state.tank.mass / (RHO * self.area),
            Signal::HeaterCommand => state.heater_cmd,
            Signal::HeaterPower => state.heater_power,
            Signal::PumpCommand => state.pump_cmd,
            Signal::PumpFlow => state.flows.pump,
            Signal::ValveCommand => state.valve_cmd,
            Signal::ValveFlow => state.flows.valve,
            Signal::SupplyTemperature => state.supply_temp,
        }
    }

    pub(crate) fn record(&self, state: &PlantState, out: &mut Vec<f64>) {
        out.extend(self.tags.iter().map(|s| self.read(state, *s)));
    }

    fn drives(&self, topology: &PlantTopology, inputs: &StepInputs) -> Result<Drives, PlantError> {
        let setpoints = self
            .loops
            .iter()
            .map(|l| {
                inputs
                    .setpoints
                    .get(&l.spec.setpoint)
                    .copied()
                    .ok_or_else(|| PlantError::ScenarioInvalid(format!("no setpoint for {}", l.spec.setpoint)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut d = Drives {
            setpoints,
            ..Drives::default()
        };
        for (tag, &v) in &inputs.overrides {
            let spec = topology.tag(tag).ok_or_else(|| PlantError::UnknownTag(tag.clone()))?;
            d.set(spec.signal, v)
                .map_err(|_| PlantError::ScenarioInvalid(format!("{tag} cannot be overridden")))?;
        }
        Ok(d)
    }

    fn flows(&self, state: &PlantState, dt: f64) -> (Flows, bool) {
        let mass = state.tank.mass.max(0.0);
        let mut pump = state.pump_cmd * self.pump_max;
        let valve_wanted = state.valve_cmd * self.valve_max;
        let mut valve = valve_wanted.min(mass / dt + pump);
        let mut limited = valve < valve_wanted;
        let room = (self.max_mass() - mass) / dt + valve;
        if pump > room {
            pump = room.max(0.0);
            valve = valve.min(mass / dt + pump);
            limited = true;
        }
        (Flows { pump, valve }, limited)
    }

    fn step(&self, state: &PlantState, drives: &Drives, dt: f64) -> Result<PlantState, PlantError> {
        if !(dt > 0.0) {
            return Err(PlantError::InvalidStep(dt));
        }
        let mut next = state.clone();
        for (k, l) in self.loops.iter().enumerate() {
            if drives.get(l.actuator).is_some() {
                continue;
            }
            let pv = self.read(state, l.measured);
            let out = pi_update(&l.spec, state.integrals[k], drives.setpoints[k], pv, dt);
            next.integrals[k] = out.integral;
            // Loops only ever drive actuator signals.
            let _ = next.set_actuator(l.actuator, out.command);
        }
        for signal in [
            Signal::HeaterCommand,
            Signal::PumpCommand,
            Signal::ValveCommand,
            Signal::SupplyTemperature,
        ] {
            if let Some(v) = drives.get(signal) {
                let _ = next.set_actuator(signal, v);
            }
        }
        for u in [&mut next.heater_cmd, &mut next.pump_cmd, &mut next.valve_cmd] {
            if !(0.0..=1.0).contains(u) {
                *u = u.clamp(0.0, 1.0);
                next.clamp_events += 1;
            }
        }

        next.heater_power += dt / self.heater_tau * (next.heater_cmd * self.heater_max - next.heater_power);
        if !(0.0..=self.heater_max).contains(&next.heater_power) {
            next.heater_power = next.heater_power.clamp(0.0, self.heater_max);
            next.clamp_events += 1;
        }

        let (flows, limited) = self.flows(&next, dt);
        next.flows = flows;
        if limited {
            next.clamp_events += 1;
        }

        let mass = state.tank.mass + (flows.pump - flows.valve) * dt;
        if mass <= MIN_MASS {
            return Err(PlantError::StepDegenerate {
                time: state.time + dt,
                mass,
            });
        }
        let t = state.tank.temp;
        let heat = flows.pump * CP * (next.supply_temp - t) + next.heater_power - self.ua * (t - T_AMBIENT);
        next.tank = TankState {
            mass,
            temp: t + dt * heat / (mass * CP),
        };
        next.time = state.time + dt;
        Ok(next)
    }
}

impl Drives {
    fn get(&self, signal: Signal) -> Option<f64> {
        match signal {
            Signal::HeaterCommand => self.heater,
            Signal::PumpCommand => self.pump,
            Signal::ValveCommand => self.valve,
            Signal::SupplyTemperature => self.supply,
            _ => None,
        }
    }

    fn set(&mut self, signal: Signal, v: f64) -> Result<(), ()> {
        let slot = match signal {
            Signal::HeaterCommand => &mut self.heater,
            Signal::PumpCommand => &mut self.pump,
            Signal::ValveCommand => &mut self.valve,
            Signal::SupplyTemperature => &mut self.supply,
            _ => return Err(()),
        };
        *slot = Some(v);
        Ok(())
    }
}

impl PlantState {
    fn set_actuator(&mut self, signal: Signal, v: f64) -> Result<(), ()> {
        match signal {
            Signal::HeaterCommand => self.heater_cmd = v,
            Signal::PumpCommand => self.pump_cmd = v,
            Signal::ValveCommand => self.valve_cmd = v,
            Signal::SupplyTemperature => self.supply_temp = v,
            _ => return Err(()),
        }
        Ok(())
    }

    /// Overwrites a writable state variable (currently the tank temperature).
    pub fn write(&mut self, topology: &PlantTopology, tag: &str, value: f64) -> Result<(), PlantError> {
        match topology.tag(tag).map(|t| t.signal) {
            Some(Signal::TankTemperature) => {
                self.tank.temp = value;
                Ok(())
            }
            Some(_) => Err(PlantError::InvalidTopology(format!("{tag} is not a writable state variable"))),
            None => Err(PlantError::UnknownTag(tag.to_string())),
        }
    }

    /// Current value of `tag`.
    pub fn read(&self, topology: &PlantTopology, tag: &str) -> Result<f64, PlantError> {
        let signal = topology
            .tag(tag)
            .ok_or_else(|| PlantError::UnknownTag(tag.to_string()))?
            .signal;
        Ok(Resolved::new(topology)?.read(self, signal))
    }
}

/// Pump and valve mass flows implied by the current commands.
///
/// Outflow is limited to what the tank can supply during `dt`, and inflow to
/// what it can hold, so neither the mass bound nor the level bound is crossed.
pub fn derive_flows(topology: &PlantTopology, state: &PlantState, dt: f64) -> Result<Flows, PlantError> {
    if !(dt > 0.0) {
        return Err(PlantError::InvalidStep(dt));
    }
    Ok(Resolved::new(topology)?.flows(state, dt).0)
}

/// One explicit-Euler step: PI loops, heater lag, flows, mass balance, then
/// the well-mixed energy balance evaluated with the updated mass.
pub fn step(topology: &PlantTopology, state: &PlantState, inputs: &StepInputs, dt: f64) -> Result<PlantState, PlantError> {
    let resolved = Resolved::new(topology)?;
    let drives = resolved.drives(topology, inputs)?;
    resolved.step(state, &drives, dt)
}

/// Stepper for callers that advance a plant one step at a time.
pub(crate) struct Stepper<'a> {
    topology: &'a PlantTopology,
    resolved: Resolved,
    scenario: &'a ScenarioSchedule,
    steps: usize,
    start: f64,
}

impl<'a> Stepper<'a> {
    /// `start` is the clock of the initial state; row `k` is stamped
    /// `start + k * dt` so the grid does not drift.
    pub(crate) fn new(topology: &'a PlantTopology, scenario: &'a ScenarioSchedule, start: f64) -> Result<Self, PlantError> {
        scenario.validate()?;
        let resolved = Resolved::new(topology)?;
        for l in &resolved.loops {
            if !scenario.setpoints.contains_key(&l.spec.setpoint) {
                return Err(PlantError::ScenarioInvalid(format!("no setpoint schedule for {}", l.spec.setpoint)));
            }
        }
        for tag in scenario.overrides.keys() {
            let spec = topology.tag(tag).ok_or_else(|| PlantError::UnknownTag(tag.clone()))?;
            if !spec.signal.is_actuator() {
                return Err(PlantError::ScenarioInvalid(format!("{tag} cannot be overridden")));
            }
        }
        Ok(Self {
            topology,
            steps: scenario.step_count(),
            resolved,
            scenario,
            start,
        })
    }

    pub(crate) fn steps(&self) -> usize {
        self.steps
    }

    pub(crate) fn tags(&self) -> Vec<String> {
        self.topology.tag_names()
    }

    pub(crate) fn record(&self, state: &PlantState, out: &mut Vec<f64>) {
        self.resolved.record(state, out)
    }

    /// Advances from row `k - 1` to row `k` (k starts at 1).
    pub(crate) fn advance(&self, state: &PlantState, k: usize) -> Result<PlantState, PlantError> {
        let inputs = self.scenario.inputs_at((k - 1) as f64 * self.scenario.dt);
        let drives = self.resolved.drives(self.topology, &inputs)?;
        let mut next = self.resolved.step(state, &drives, self.scenario.dt)?;
        next.time = self.start + k as f64 * self.scenario.dt;
        Ok(next)
    }
}

/// Runs `scenario` from `initial`, recording every registered tag at the
/// initial instant and after each of the `ceil(duration / dt)` steps.
pub fn run_scenario(
    topology: &PlantTopology,
    scenario: &ScenarioSchedule,
    initial: &PlantState,
) -> Result<TimeSeriesFrame, PlantError> {
    let stepper = Stepper::new(topology, scenario, initial.time)?;
    if initial.integrals.len() != topology.control_loops.len() {
        return Err(PlantError::InvalidTopology(format!(
            "state has {} loop integrals, plant has {} loops",
            initial.integrals.len(),
            topology.control_loops.len()
        )));
    }
    let n = stepper.steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity((n + 1) * topology.tags.len());
    times.push(initial.time);
    stepper.record(initial, &mut values);
    let mut state = initial.clone();
    for k in 1..=n {
        state = stepper.advance(&state, k)?;
        times.push(state.time);
        stepper.record(&state, &mut values);
    }
    TimeSeriesFrame::new(stepper.tags(), times, values).map_err(|e| PlantError::InvalidTopology(e.to_string()))
}

/// Equilibrium state for the given setpoints and actuator overrides: level and
/// temperature at their setpoints, inflow matching outflow, heater power
/// balancing the through-flow and ambient losses, loop integrals preloaded so
/// the controllers hold their outputs.
pub fn steady_state(
    topology: &PlantTopology,
    setpoints: &BTreeMap<String, f64>,
    overrides: &BTreeMap<String, f64>,
) -> Result<PlantState, PlantError> {
    let r = Resolved::new(topology)?;
    let inputs = StepInputs {
        setpoints: setpoints.clone(),
        overrides: overrides.clone(),
    };
    let drives = r.drives(topology, &inputs)?;
    let target = |signal: Signal| {
        r.loops
            .iter()
            .zip(&drives.setpoints)
            .find(|(l, _)| l.measured == signal)
            .map(|(_, sp)| *sp)
            .ok_or_else(|| PlantError::ScenarioInvalid(format!("steady state needs a loop on {signal:?}")))
    };
    let level = target(Signal::TankLevel)?;
    let temp = target(Signal::TankTemperature)?;
    let supply = drives.supply.unwrap_or(r.supply_temp);
    let valve_cmd = drives.valve.unwrap_or(0.0);
    let flow = valve_cmd * r.valve_max;
    let pump_cmd = drives.pump.unwrap_or(flow / r.pump_max);
    let heat = flow * CP * (temp - supply) + r.ua * (temp - T_AMBIENT);
    let heater_cmd = drives.heater.unwrap_or((heat / r.heater_max).clamp(0.0, 1.0));
    let mut state = PlantState {
        time: 0.0,
        tank: TankState {
            mass: RHO * r.area * level,
            temp,
        },
        heater_power: heater_cmd * r.heater_max,
        heater_cmd,
        pump_cmd,
        valve_cmd,
        supply_temp: supply,
        flows: Flows {
            pump: pump_cmd * r.pump_max,
            valve: flow,
        },
        integrals: vec![0.0; r.loops.len()],
        clamp_events: 0,
    };
    for (k, l) in r.loops.iter().enumerate() {
        let command = r.read(&state, l.actuator);
        if l.spec.ki > 0.0 {
            state.integrals[k] = command / l.spec.ki;
        }
    }
    Ok(state)
}
