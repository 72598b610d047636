//! Post-contingency frequency dynamics: classical multi-machine swing-equation
//! model, fixed-step RK4 integration, nadir extraction, and ground-truth
//! frequency security assessment (FSA).

mod fsa;
mod integrate;
mod model;

pub use fsa::{run_fsa_tds, ContingencyExtremes, FsaThresholds, FsaVerdict};
pub use integrate::{frequency_nadir, integrate_reduced, integrate_swing, SimParams, TrajectoryRecord};
pub use model::{electrical_power, swing_derivative, DynamicModel, ReducedSystem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContingencyKind {
    /// Permanent removal of a line at `t_apply`.
    LineTrip,
    /// Constant-admittance active-load step at a bus at `t_apply`.
    LoadStep,
    /// Bolted fault at the line's receiving end for `fault_duration`
    /// seconds, after which the line trips permanently.
    ThreePhaseFault,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Contingency {
    pub kind: ContingencyKind,
    /// Line id for trips/faults, bus id for load steps.
    pub location: usize,
    /// Active-power step size, pu (load_step only; may be negative).
    #[serde(default)]
    pub magnitude: f64,
    pub t_apply: f64,
    /// Five cycles at 60 Hz unless overridden (fault only).
    #[serde(default = "default_fault_duration")]
    pub fault_duration: f64,
}

fn default_fault_duration() -> f64 {
    0.083
}

impl Contingency {
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.t_apply < 0.0 {
            return Err(Error::InvalidInput("contingency t_apply must be >= 0".into()));
        }
        match self.kind {
            ContingencyKind::LineTrip | ContingencyKind::ThreePhaseFault => {
                if self.location >= net.lines.len() {
                    return Err(Error::InvalidInput(format!(
                        "contingency references unknown line {}",
                        self.location
                    )));
                }
                if self.kind == ContingencyKind::ThreePhaseFault && self.fault_duration <= 0.0 {
                    return Err(Error::InvalidInput("fault_duration must be positive".into()));
                }
            }
            ContingencyKind::LoadStep => {
                if self.location >= net.n_buses() {
                    return Err(Error::InvalidInput(format!(
                        "contingency references unknown bus {}",
                        self.location
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Load a contingency set from a JSON list.
pub fn load_contingencies(path: impl AsRef<std::path::Path>) -> Result<Vec<Contingency>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
