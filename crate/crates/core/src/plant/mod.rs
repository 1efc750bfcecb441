//! Fixed-step first-principles simulator of a laboratory water plant.
//!
//! The flow path is `source -> pump -> tank (with heater) -> load valve -> sink`.
//! Flows are prescribed by actuator laws (no pressure network); the tank is
//! well mixed and integrated with explicit Euler.

mod control;
mod scenario;
mod sim;
mod topology;

pub use control::{pi_update, PiOutput};
pub use scenario::{
    default_scenario, reference_scenario, replay_overrides, Disturbances, ScenarioSchedule, Segment, SetpointStep,
};
pub use sim::{derive_flows, run_scenario, steady_state, step, Flows, PlantState, StepInputs, TankState};
pub(crate) use sim::Stepper;
pub use topology::{
    build_default_plant, validate_topology, ComponentKind, ComponentSpec, Connection, PiLoopSpec, PlantTopology,
    Signal, TagSpec, ValidationReport, Violation,
};

use thiserror::Error;

/// Water density, kg/m³.
pub const RHO: f64 = 997.0;
/// Specific heat of water, J/(kg·K).
pub const CP: f64 = 4186.0;
/// Ambient temperature, °C.
pub const T_AMBIENT: f64 = 20.0;
/// Below this tank mass the temperature is undefined.
pub const MIN_MASS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("STEP_DEGENERATE: tank mass {mass} kg at t={time} s")]
    StepDegenerate { time: f64, mass: f64 },
    #[error("INVALID_TOPOLOGY: {0}")]
    InvalidTopology(String),
    #[error("SCENARIO_INVALID: {0}")]
    ScenarioInvalid(String),
    #[error("UNKNOWN_TAG: {0}")]
    UnknownTag(String),
    #[error("INVALID_STEP: dt must be positive, got {0}")]
    InvalidStep(f64),
}

impl PlantError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::StepDegenerate { .. } => "STEP_DEGENERATE",
            Self::InvalidTopology(_) => "INVALID_TOPOLOGY",
            Self::ScenarioInvalid(_) => "SCENARIO_INVALID",
            Self::UnknownTag(_) => "UNKNOWN_TAG",
            Self::InvalidStep(_) => "INVALID_STEP",
        }
    }
}
