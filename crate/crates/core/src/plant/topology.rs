use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::PlantError;

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentKind {
    /// Supply of fresh water at `supply_temp` °C.
    Source { supply_temp: f64 },
    /// Mass flow `u * max_flow` kg/s.
    Pump { max_flow: f64 },
    /// Well-mixed tank. `ua` is the heat-loss coefficient to ambient, W/K.
    Tank { area: f64, max_level: f64, ua: f64 },
    /// Immersion heater inside `tank`; delivered power lags the command with
    /// time constant `time_constant` seconds.
    Heater { tank: String, max_power: f64, time_constant: f64 },
    /// Outflow `u * max_flow` kg/s.
    Valve { max_flow: f64 },
    Sink,
}

impl ComponentKind {
    fn name(&self) -> &'static str {
        match self {
            Self::Source { .. } => "source",
            Self::Pump { .. } => "pump",
            Self::Tank { .. } => "tank",
            Self::Heater { .. } => "heater",
            Self::Valve { .. } => "valve",
            Self::Sink => "sink",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub id: String,
    pub kind: ComponentKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiLoopSpec {
    pub name: String,
    pub measured: String,
    /// Key of the setpoint schedule in a scenario.
    pub setpoint: String,
    pub actuated: String,
    pub kp: f64,
    pub ki: f64,
    pub out_lo: f64,
    pub out_hi: f64,
}

/// Physical quantity a tag exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    TankTemperature,
    TankLevel,
    HeaterCommand,
    HeaterPower,
    PumpCommand,
    PumpFlow,
    ValveCommand,
    ValveFlow,
    SupplyTemperature,
}

impl Signal {
    fn component_kind(self) -> &'static str {
        match self {
            Self::TankTemperature | Self::TankLevel => "tank",
            Self::HeaterCommand | Self::HeaterPower => "heater",
            Self::PumpCommand | Self::PumpFlow => "pump",
            Self::ValveCommand | Self::ValveFlow => "valve",
            Self::SupplyTemperature => "source",
        }
    }

    /// Signals a scenario or a loop may drive directly.
    pub fn is_actuator(self) -> bool {
        matches!(
            self,
            Self::HeaterCommand | Self::PumpCommand | Self::ValveCommand | Self::SupplyTemperature
        )
    }

    /// Signals an external model may overwrite.
    pub fn is_writable_state(self) -> bool {
        matches!(self, Self::TankTemperature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagSpec {
    pub name: String,
    pub component: String,
    pub signal: Signal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantTopology {
    pub components: Vec<ComponentSpec>,
    /// Flow path, listed upstream to downstream.
    pub connections: Vec<Connection>,
    pub control_loops: Vec<PiLoopSpec>,
    pub tags: Vec<TagSpec>,
}

fn tag(name: &str, component: &str, signal: Signal) -> TagSpec {
    TagSpec {
        name: name.into(),
        component: component.into(),
        signal,
    }
}

/// Reference laboratory plant: 15 °C supply, 0.2 kg/s pump, 0.2 m² tank with
/// a 9 kW heater, 0.2 kg/s load valve, temperature and level PI loops.
pub fn build_default_plant() -> PlantTopology {
    use ComponentKind::*;
    let component = |id: &str, kind| ComponentSpec { id: id.into(), kind };
    let connect = |from: &str, to: &str| Connection {
        from: from.into(),
        to: to.into(),
    };
    PlantTopology {
        components: vec![
            component("SRC", Source { supply_temp: 15.0 }),
            component("P100", Pump { max_flow: 0.20 }),
            component("T100", Tank { area: 0.2, max_level: 0.5, ua: 8.0 }),
            component(
                "E100",
                Heater {
                    tank: "T100".into(),
                    max_power: 9000.0,
                    time_constant: 5.0,
                },
            ),
            component("V106", Valve { max_flow: 0.20 }),
            component("SNK", Sink),
        ],
        connections: vec![
            connect("SRC", "P100"),
            connect("P100", "T100"),
            connect("T100", "V106"),
            connect("V106", "SNK"),
        ],
        control_loops: vec![
            PiLoopSpec {
                name: "TC100".into(),
                measured: "T100.T".into(),
                setpoint: "T100.T".into(),
                actuated: "E100.u".into(),
                kp: 0.1,
                ki: 0.005,
                out_lo: 0.0,
                out_hi: 1.0,
            },
            PiLoopSpec {
                name: "LC100".into(),
                measured: "T100.level".into(),
                setpoint: "T100.level".into(),
                actuated: "P100.u".into(),
                kp: 2.0,
                ki: 0.05,
                out_lo: 0.0,
                out_hi: 1.0,
            },
        ],
        tags: vec![
            tag("T100.T", "T100", Signal::TankTemperature),
            tag("T100.level", "T100", Signal::TankLevel),
            tag("E100.u", "E100", Signal::HeaterCommand),
            tag("E100.Q", "E100", Signal::HeaterPower),
            tag("P100.u", "P100", Signal::PumpCommand),
            tag("P100.mdot", "P100", Signal::PumpFlow),
            tag("V106.u", "V106", Signal::ValveCommand),
            tag("V106.mdot", "V106", Signal::ValveFlow),
            tag("SRC.Tin", "SRC", Signal::SupplyTemperature),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn push(&mut self, code: &'static str, detail: String) {
        self.violations.push(Violation { code, detail });
    }
}

/// Lists every structural problem of `topology`; an empty report means the
/// plant can be simulated.
pub fn validate_topology(topology: &PlantTopology) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut by_id: BTreeMap<&str, &ComponentKind> = BTreeMap::new();
    for c in &topology.components {
        if by_id.insert(&c.id, &c.kind).is_some() {
            report.push("DUPLICATE_COMPONENT", format!("component id {} used twice", c.id));
        }
    }

    for c in &topology.components {
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0) || !v.is_finite() {
                report.push("NONPOSITIVE_PARAM", format!("{}.{name} = {v}", c.id));
            }
        };
        match &c.kind {
            ComponentKind::Source { supply_temp } => {
                if !supply_temp.is_finite() {
                    report.push("NONPOSITIVE_PARAM", format!("{}.supply_temp = {supply_temp}", c.id));
                }
            }
            ComponentKind::Pump { max_flow } | ComponentKind::Valve { max_flow } => positive("max_flow", *max_flow),
            ComponentKind::Tank { area, max_level, ua } => {
                positive("area", *area);
                positive("max_level", *max_level);
                // An adiabatic tank (ua = 0) is allowed.
                if !(*ua >= 0.0) || !ua.is_finite() {
                    report.push("NONPOSITIVE_PARAM", format!("{}.ua = {ua}", c.id));
                }
            }
            ComponentKind::Heater {
                max_power,
                time_constant,
                ..
            } => {
                positive("max_power", *max_power);
                positive("time_constant", *time_constant);
            }
            ComponentKind::Sink => {}
        }
    }

    let heaters: Vec<(&str, &str)> = topology
        .components
        .iter()
        .filter_map(|c| match &c.kind {
            ComponentKind::Heater { tank, .. } => Some((c.id.as_str(), tank.as_str())),
            _ => None,
        })
        .collect();
    for (id, tank) in &heaters {
        if !matches!(by_id.get(tank), Some(ComponentKind::Tank { .. })) {
            report.push("DANGLING_CONNECTION", format!("heater {id} sits in unknown tank {tank}"));
        }
    }
    if heaters.len() != 1 {
        report.push("HEATER_COUNT", format!("expected exactly one heated tank, found {}", heaters.len()));
    }

    for conn in &topology.connections {
        for end in [&conn.from, &conn.to] {
            if !by_id.contains_key(end.as_str()) {
                report.push("DANGLING_CONNECTION", format!("{} -> {}: unknown {end}", conn.from, conn.to));
            }
        }
    }
    if has_cycle(&topology.connections) {
        report.push("CYCLIC_PATH", "flow path contains a cycle".into());
    } else if report.violations.is_empty() {
        if let Err(e) = resolve_path(topology) {
            report.push("UNSUPPORTED_LAYOUT", e.to_string());
        }
    }

    let mut seen = BTreeSet::new();
    for t in &topology.tags {
        if !crate::historian::is_valid_tag(&t.name) {
            report.push("INVALID_TAG", format!("tag name {:?}", t.name));
        }
        if !seen.insert(t.name.as_str()) {
            report.push("DUPLICATE_TAG", format!("tag {} registered twice", t.name));
        }
        match by_id.get(t.component.as_str()) {
            None => report.push("DANGLING_TAG", format!("tag {} references unknown {}", t.name, t.component)),
            Some(kind) if kind.name() != t.signal.component_kind() => report.push(
                "TAG_KIND_MISMATCH",
                format!("tag {} reads {:?} from a {}", t.name, t.signal, kind.name()),
            ),
            Some(_) => {}
        }
    }

    let find_tag = |name: &str| topology.tags.iter().find(|t| t.name == name);
    for l in &topology.control_loops {
        if find_tag(&l.measured).is_none() {
            report.push("LOOP_UNKNOWN_TAG", format!("loop {} measures unknown {}", l.name, l.measured));
        }
        match find_tag(&l.actuated) {
            None => report.push("LOOP_UNKNOWN_TAG", format!("loop {} drives unknown {}", l.name, l.actuated)),
            Some(t) if !t.signal.is_actuator() => {
                report.push("LOOP_NOT_ACTUATOR", format!("loop {} drives non-actuator {}", l.name, l.actuated))
            }
            Some(_) => {}
        }
        if !(l.out_hi > l.out_lo) {
            report.push("LOOP_BAD_CLAMP", format!("loop {} clamp [{}, {}]", l.name, l.out_lo, l.out_hi));
        }
        if !(l.kp >= 0.0) || !(l.ki >= 0.0) {
            report.push("LOOP_NEGATIVE_GAIN", format!("loop {} kp={} ki={}", l.name, l.kp, l.ki));
        }
    }
    report
}

fn has_cycle(connections: &[Connection]) -> bool {
    // Kahn's algorithm over the connection graph.
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    for c in connections {
        indegree.entry(&c.from).or_default();
        *indegree.entry(&c.to).or_default() += 1;
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut removed = 0;
    while let Some(n) = ready.pop() {
        removed += 1;
        for c in connections.iter().filter(|c| c.from == n) {
            let d = indegree.get_mut(c.to.as_str()).expect("node registered");
            *d -= 1;
            if *d == 0 {
                ready.push(&c.to);
            }
        }
    }
    removed != indegree.len()
}

/// Component indices of the supported flow path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowPath {
    pub source: usize,
    pub pump: usize,
    pub tank: usize,
    pub heater: usize,
    pub valve: usize,
}

pub(crate) fn resolve_path(topology: &PlantTopology) -> Result<FlowPath, PlantError> {
    let index = |id: &str| topology.components.iter().position(|c| c.id == id);
    let next = |id: &str| -> Result<usize, PlantError> {
        let outs: Vec<&Connection> = topology.connections.iter().filter(|c| c.from == id).collect();
        match outs.as_slice() {
            [c] => index(&c.to).ok_or_else(|| PlantError::InvalidTopology(format!("unknown component {}", c.to))),
            _ => Err(PlantError::InvalidTopology(format!("{id} must have exactly one downstream connection"))),
        }
    };
    let kind_at = |i: usize| topology.components[i].kind.name();
    let expect = |i: usize, kind: &str| -> Result<usize, PlantError> {
        if kind_at(i) == kind {
            Ok(i)
        } else {
            Err(PlantError::InvalidTopology(format!(
                "expected a {kind} at {}, found a {}",
                topology.components[i].id,
                kind_at(i)
            )))
        }
    };
    let sources: Vec<usize> = (0..topology.components.len()).filter(|&i| kind_at(i) == "source").collect();
    let [source] = sources[..] else {
        return Err(PlantError::InvalidTopology("expected exactly one source".into()));
    };
    let pump = expect(next(&topology.components[source].id)?, "pump")?;
    let tank = expect(next(&topology.components[pump].id)?, "tank")?;
    let valve = expect(next(&topology.components[tank].id)?, "valve")?;
    expect(next(&topology.components[valve].id)?, "sink")?;
    let tank_id = &topology.components[tank].id;
    let heater = topology
        .components
        .iter()
        .position(|c| matches!(&c.kind, ComponentKind::Heater { tank, .. } if tank == tank_id))
        .ok_or_else(|| PlantError::InvalidTopology(format!("no heater in {tank_id}")))?;
    Ok(FlowPath {
        source,
        pump,
        tank,
        heater,
        valve,
    })
}

impl PlantTopology {
    pub fn tag(&self, name: &str) -> Option<&TagSpec> {
        self.tags.iter().find(|t| t.name == name)
    }

    pub fn tag_names(&self) -> Vec<String> {
        self.tags.iter().map(|t| t.name.clone()).collect()
    }

    pub fn component_mut(&mut self, id: &str) -> Option<&mut ComponentSpec> {
        self.components.iter_mut().find(|c| c.id == id)
    }

    /// Copy of the plant with every tank's heat-loss coefficient multiplied by
    /// `factor`.
    pub fn with_ua_scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        for c in &mut t.components {
            if let ComponentKind::Tank { ua, .. } = &mut c.kind {
                *ua *= factor;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plant_shape() {
        let p = build_default_plant();
        assert_eq!(p.components.len(), 6);
        assert_eq!(p.control_loops.len(), 2);
        for t in ["T100.T", "E100.u", "V106.u", "T100.level", "E100.Q", "P100.u", "P100.mdot", "V106.mdot", "SRC.Tin"] {
            assert!(p.tag(t).is_some(), "{t}");
        }
        assert!(validate_topology(&p).is_valid(), "{:?}", validate_topology(&p));
    }

    #[test]
    fn duplicate_tag() {
        let mut p = build_default_plant();
        p.tags.push(tag("T100.T", "T100", Signal::TankTemperature));
        assert_eq!(validate_topology(&p).codes(), vec!["DUPLICATE_TAG"]);
    }

    #[test]
    fn zero_area_tank() {
        let mut p = build_default_plant();
        if let ComponentKind::Tank { area, .. } = &mut p.component_mut("T100").unwrap().kind {
            *area = 0.0;
        }
        assert_eq!(validate_topology(&p).codes(), vec!["NONPOSITIVE_PARAM"]);
    }

    #[test]
    fn dangling_and_cyclic() {
        let mut p = build_default_plant();
        p.connections.push(Connection {
            from: "V106".into(),
            to: "NOPE".into(),
        });
        assert!(validate_topology(&p).codes().contains(&"DANGLING_CONNECTION"));

        let mut p = build_default_plant();
        p.connections.push(Connection {
            from: "V106".into(),
            to: "P100".into(),
        });
        assert!(validate_topology(&p).codes().contains(&"CYCLIC_PATH"));
    }

    #[test]
    fn heater_count_and_loop_checks() {
        let mut p = build_default_plant();
        p.components.retain(|c| c.id != "E100");
        p.tags.retain(|t| t.component != "E100");
        p.control_loops.retain(|l| l.name != "TC100");
        assert_eq!(validate_topology(&p).codes(), vec!["HEATER_COUNT"]);

        let mut p = build_default_plant();
        p.control_loops[0].out_hi = -1.0;
        p.control_loops[1].actuated = "T100.T".into();
        p.control_loops[1].ki = -0.1;
        let codes = validate_topology(&p).codes();
        assert!(codes.contains(&"LOOP_BAD_CLAMP"));
        assert!(codes.contains(&"LOOP_NOT_ACTUATOR"));
        assert!(codes.contains(&"LOOP_NEGATIVE_GAIN"));
    }

    #[test]
    fn unsupported_layout_reported() {
        let mut p = build_default_plant();
        p.connections.swap(0, 3);
        p.connections[0] = Connection {
            from: "SRC".into(),
            to: "T100".into(),
        };
        p.connections[3] = Connection {
            from: "P100".into(),
            to: "SNK".into(),
        };
        let codes = validate_topology(&p).codes();
        assert!(!codes.is_empty());
    }
}
