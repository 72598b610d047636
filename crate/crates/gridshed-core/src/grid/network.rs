//! Static network representation and JSON case files.
//!
//! All electrical quantities are per-unit on `base_mva`; angles are radians;
//! frequency is Hz. Bus ids are 0-based and index straight into `buses`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    /// Angle reference; absorbs the system power imbalance.
    Slack,
    /// Generator (PV) bus: fixed P and |V|.
    Generator,
    /// Load-only (PQ) bus: fixed P and Q.
    LoadOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Voltage magnitude, pu. Setpoint for slack/generator buses; solved
    /// value after a power flow.
    pub voltage_mag: f64,
    /// Voltage angle, rad.
    pub voltage_ang: f64,
    /// Net active injection, pu (generation minus load). Output of the solver.
    #[serde(default)]
    pub p_net: f64,
    /// Net reactive injection, pu. Output of the solver.
    #[serde(default)]
    pub q_net: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series resistance, pu.
    pub resistance: f64,
    /// Series reactance, pu.
    pub reactance: f64,
    /// Total charging susceptance, pu (half at each end).
    #[serde(default)]
    pub shunt_susceptance: f64,
    #[serde(default = "default_true")]
    pub in_service: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Inertia constant H, seconds on the system base.
    pub inertia_h: f64,
    /// Damping coefficient D, pu power per pu frequency deviation.
    pub damping_d: f64,
    /// Mechanical power setpoint, pu. The slack machine's dispatch is
    /// overwritten by the power flow result.
    pub p_mech: f64,
    /// Transient reactance x'_d, pu.
    pub transient_reactance: f64,
    /// Nominal internal EMF, pu. Dynamic initialization recomputes the
    /// actual EMF from the solved power flow.
    #[serde(default = "default_one")]
    pub internal_voltage: f64,
}

fn default_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    pub p_load: f64,
    pub q_load: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub f_nominal: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

impl Network {
    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn slack_bus(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    /// Index of the generator attached to the slack bus.
    pub fn slack_generator(&self) -> usize {
        let slack = self.slack_bus();
        self.generators
            .iter()
            .position(|g| g.bus == slack)
            .expect("validated network has a slack machine")
    }

    /// Total scheduled active injection per bus: generator dispatch minus load.
    pub fn scheduled_p(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n_buses()];
        for g in &self.generators {
            p[g.bus] += g.p_mech;
        }
        for l in &self.loads {
            p[l.bus] -= l.p_load;
        }
        p
    }

    /// Total scheduled reactive injection per bus (loads only; generator
    /// reactive output is free at PV/slack buses).
    pub fn scheduled_q(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.n_buses()];
        for l in &self.loads {
            q[l.bus] -= l.q_load;
        }
        q
    }

    /// Aggregate load per bus as (p, q).
    pub fn bus_loads(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.n_buses()];
        for l in &self.loads {
            out[l.bus].0 += l.p_load;
            out[l.bus].1 += l.q_load;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.buses.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("no buses".into()));
        }
        if self.base_mva <= 0.0 || self.f_nominal <= 0.0 {
            return Err(Error::InvalidNetwork("base_mva and f_nominal must be positive".into()));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.id != i {
                return Err(Error::InvalidNetwork(format!(
                    "bus ids must be 0-based and consecutive (bus {} has id {})",
                    i, b.id
                )));
            }
            if b.voltage_mag <= 0.0 {
                return Err(Error::InvalidNetwork(format!("bus {} has non-positive voltage", i)));
            }
        }
        let slack_count = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack_count != 1 {
            return Err(Error::InvalidNetwork(format!(
                "exactly one slack bus required, found {}",
                slack_count
            )));
        }
        for (k, line) in self.lines.iter().enumerate() {
            if line.from_bus >= n || line.to_bus >= n {
                return Err(Error::InvalidNetwork(format!("line {} references unknown bus", k)));
            }
            if line.from_bus == line.to_bus {
                return Err(Error::InvalidNetwork(format!("line {} is a self-loop", k)));
            }
            if line.resistance == 0.0 && line.reactance == 0.0 {
                return Err(Error::ZeroImpedanceBranch { line: k });
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if g.bus >= n {
                return Err(Error::InvalidNetwork(format!("generator {} references unknown bus", k)));
            }
            if g.inertia_h <= 0.0 {
                return Err(Error::InvalidNetwork(format!("generator {} has non-positive inertia", k)));
            }
            if g.damping_d < 0.0 {
                return Err(Error::InvalidNetwork(format!("generator {} has negative damping", k)));
            }
            if g.transient_reactance <= 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "generator {} needs a positive transient reactance",
                    k
                )));
            }
        }
        let slack = self.slack_bus();
        if !self.generators.iter().any(|g| g.bus == slack) {
            return Err(Error::InvalidNetwork("slack bus has no generator".into()));
        }
        for (k, l) in self.loads.iter().enumerate() {
            if l.bus >= n {
                return Err(Error::InvalidNetwork(format!("load {} references unknown bus", k)));
            }
            if l.p_load < 0.0 {
                return Err(Error::InvalidNetwork(format!("load {} has negative active power", k)));
            }
        }
        if !self.is_connected() {
            return Err(Error::InvalidNetwork(
                "in-service lines do not form a connected graph".into(),
            ));
        }
        Ok(())
    }

    /// Connectivity over in-service lines.
    pub fn is_connected(&self) -> bool {
        let n = self.n_buses();
        if n == 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for line in self.lines.iter().filter(|l| l.in_service) {
            adj[line.from_bus].push(line.to_bus);
            adj[line.to_bus].push(line.from_bus);
        }
        let mut seen = HashSet::from([0usize]);
        let mut stack = vec![0usize];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == n
    }

    /// Hop distance from every bus to `from`, over in-service lines.
    pub fn hop_distances(&self, from: usize) -> Vec<usize> {
        let n = self.n_buses();
        let mut adj = vec![Vec::new(); n];
        for line in self.lines.iter().filter(|l| l.in_service) {
            adj[line.from_bus].push(line.to_bus);
            adj[line.to_bus].push(line.from_bus);
        }
        let mut dist = vec![usize::MAX; n];
        dist[from] = 0;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus() -> Network {
        Network {
            base_mva: 100.0,
            f_nominal: 60.0,
            buses: vec![
                Bus { id: 0, kind: BusKind::Slack, voltage_mag: 1.0, voltage_ang: 0.0, p_net: 0.0, q_net: 0.0 },
                Bus { id: 1, kind: BusKind::LoadOnly, voltage_mag: 1.0, voltage_ang: 0.0, p_net: 0.0, q_net: 0.0 },
            ],
            lines: vec![Line {
                from_bus: 0,
                to_bus: 1,
                resistance: 0.0,
                reactance: 0.1,
                shunt_susceptance: 0.0,
                in_service: true,
            }],
            generators: vec![Generator {
                bus: 0,
                inertia_h: 5.0,
                damping_d: 1.0,
                p_mech: 0.0,
                transient_reactance: 0.1,
                internal_voltage: 1.0,
            }],
            loads: vec![],
        }
    }

    #[test]
    fn valid_case_roundtrips_through_json() {
        let net = two_bus();
        let text = serde_json::to_string(&net).unwrap();
        let back = Network::from_json(&text).unwrap();
        assert_eq!(back.n_buses(), 2);
        assert_eq!(back.slack_bus(), 0);
    }

    #[test]
    fn zero_impedance_branch_rejected() {
        let mut net = two_bus();
        net.lines[0].resistance = 0.0;
        net.lines[0].reactance = 0.0;
        assert!(matches!(net.validate(), Err(Error::ZeroImpedanceBranch { line: 0 })));
    }

    #[test]
    fn two_slack_buses_rejected() {
        let mut net = two_bus();
        net.buses[1].kind = BusKind::Slack;
        assert!(net.validate().is_err());
    }

    #[test]
    fn disconnected_graph_rejected() {
        let mut net = two_bus();
        net.lines[0].in_service = false;
        assert!(net.validate().is_err());
    }
}
