//! The constrained-MDP load-shedding environment: state assembly, action
//! application with per-bus caps, reward and constraint signals, and a
//! pluggable FSA backend (TDS ground truth or any trained surrogate).

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierModel;
use crate::dynamics::{run_fsa_tds, Contingency, FsaThresholds, SimParams};
use crate::error::{Error, Result};
use crate::grid::{solve_power_flow, Network, PowerFlowSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::scenario::{features_of, mask_buses, OperatingPoint};

/// Fraction of a bus's episode-initial load removed per flagged step.
pub const SHED_STEP_FRACTION: f64 = 0.05;
/// Maximum cumulative shed per bus, as a fraction of episode-initial load.
pub const SHED_CAP: f64 = 0.20;
/// Episode step budget.
pub const MAX_EPISODE_STEPS: usize = 4;

/// Safe/unsafe assessment of a solved operating point.
pub trait FsaBackend: Sync {
    fn assess(&self, net: &Network, sol: &PowerFlowSolution) -> Result<bool>;
    fn name(&self) -> &'static str;
}

/// Ground-truth backend: full time-domain simulation of the contingency set.
pub struct TdsBackend {
    pub contingencies: Vec<Contingency>,
    pub thresholds: FsaThresholds,
    pub sim: SimParams,
}

impl FsaBackend for TdsBackend {
    fn assess(&self, net: &Network, sol: &PowerFlowSolution) -> Result<bool> {
        Ok(run_fsa_tds(net, sol, &self.contingencies, self.thresholds, self.sim)?.safe)
    }

    fn name(&self) -> &'static str {
        "tds"
    }
}

/// Classifier-backed FSA, optionally evaluated under a missing-data mask.
pub struct SurrogateBackend {
    pub model: ClassifierModel,
    /// When set, all four feature columns of these buses are zeroed before
    /// prediction (missing PMU data at evaluation time).
    pub mask: Option<Vec<bool>>,
}

impl SurrogateBackend {
    pub fn new(model: ClassifierModel) -> Self {
        SurrogateBackend { model, mask: None }
    }

    pub fn with_mask_fraction(model: ClassifierModel, fraction: f64, seed: u64) -> Self {
        let n = model.n_buses();
        let (_, mask) = mask_buses(&vec![0.0; n * 4], n, fraction, seed);
        SurrogateBackend { model, mask: Some(mask) }
    }
}

impl FsaBackend for SurrogateBackend {
    fn assess(&self, net: &Network, sol: &PowerFlowSolution) -> Result<bool> {
        let mut features = features_of(net, sol);
        if let Some(mask) = &self.mask {
            for (b, masked) in mask.iter().enumerate() {
                if *masked {
                    for c in 0..4 {
                        features[b * 4 + c] = 0.0;
                    }
                }
            }
        }
        let (_, label) = self.model.predict(&features)?;
        Ok(label == 1)
    }

    fn name(&self) -> &'static str {
        self.model.kind().name()
    }
}

/// The `count` load buses with the largest aggregate p_load; ties go to the
/// lower bus id.
pub fn select_shed_buses(net: &Network, count: usize) -> Result<Vec<usize>> {
    let loads = net.bus_loads();
    let mut buses: Vec<usize> = (0..net.n_buses()).filter(|&b| loads[b].0 > 0.0).collect();
    if buses.len() < count {
        return Err(Error::InvalidInput(format!(
            "need {count} load buses, case has {}",
            buses.len()
        )));
    }
    buses.sort_by(|&a, &b| loads[b].0.total_cmp(&loads[a].0).then(a.cmp(&b)));
    buses.truncate(count);
    Ok(buses)
}

/// r + λ·c.
pub fn combined_reward(r: f64, c: u8, lambda: f64) -> f64 {
    r + lambda * f64::from(c)
}

/// Standardization statistics for the assembled 2N state vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StateStats {
    pub fn identity(n_buses: usize) -> Self {
        StateStats { mean: vec![0.0; 2 * n_buses], std: vec![1.0; 2 * n_buses] }
    }

    /// Per-bus injection statistics from dataset train rows
    /// (columns p then q, matching [`assemble_state`]).
    pub fn from_dataset(ds: &crate::scenario::LabeledDataset, rows: &[usize]) -> Self {
        let n = ds.n_buses;
        let mut mean = vec![0.0; 2 * n];
        let mut std = vec![0.0; 2 * n];
        if rows.is_empty() {
            return StateStats::identity(n);
        }
        for &r in rows {
            let row = ds.row(r);
            for b in 0..n {
                mean[b] += row[b * 4 + 2];
                mean[n + b] += row[b * 4 + 3];
            }
        }
        for m in &mut mean {
            *m /= rows.len() as f64;
        }
        for &r in rows {
            let row = ds.row(r);
            for b in 0..n {
                std[b] += (row[b * 4 + 2] - mean[b]).powi(2);
                std[n + b] += (row[b * 4 + 3] - mean[n + b]).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / rows.len() as f64).sqrt();
            if *s < 1e-9 {
                *s = 1.0;
            }
        }
        StateStats { mean, std }
    }
}

/// Per-bus net active then reactive injections, standardized; length 2N.
pub fn assemble_state(sol: &PowerFlowSolution, stats: &StateStats) -> Vec<f64> {
    let n = sol.p_net.len();
    let mut out = Vec::with_capacity(2 * n);
    for b in 0..n {
        out.push((sol.p_net[b] - stats.mean[b]) / stats.std[b]);
    }
    for b in 0..n {
        out.push((sol.q_net[b] - stats.mean[n + b]) / stats.std[n + b]);
    }
    out
}

#[derive(Clone, Debug)]
pub struct EnvState {
    /// Current network with shedding applied to its loads.
    pub network: Network,
    pub solution: PowerFlowSolution,
    pub step_index: usize,
    /// Per shed-bus fraction of the episode-initial load already removed.
    pub cumulative_shed: Vec<f64>,
    pub done: bool,
    /// Episode-initial (p, q) per load entry, frozen at reset.
    initial_loads: Vec<(f64, f64)>,
}

impl EnvState {
    fn from_operating_point(op: &OperatingPoint, n_shed: usize) -> Self {
        EnvState {
            initial_loads: op.network.loads.iter().map(|l| (l.p_load, l.q_load)).collect(),
            network: op.network.clone(),
            solution: op.solution.clone(),
            step_index: 0,
            cumulative_shed: vec![0.0; n_shed],
            done: false,
        }
    }

    /// Active generator dispatch (solved injection plus load) per generator bus.
    pub fn p_g(&self) -> Vec<f64> {
        let loads = self.network.bus_loads();
        self.network
            .generators
            .iter()
            .map(|g| self.solution.p_net[g.bus] + loads[g.bus].0)
            .collect()
    }

    pub fn q_g(&self) -> Vec<f64> {
        let loads = self.network.bus_loads();
        self.network
            .generators
            .iter()
            .map(|g| self.solution.q_net[g.bus] + loads[g.bus].1)
            .collect()
    }

    pub fn p_l(&self) -> Vec<f64> {
        self.network.loads.iter().map(|l| l.p_load).collect()
    }

    pub fn q_l(&self) -> Vec<f64> {
        self.network.loads.iter().map(|l| l.q_load).collect()
    }
}

/// Binary shed decision over the designated shed buses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub flags: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Transition {
    /// Assembled state before the action.
    pub state: Vec<f64>,
    pub action: Action,
    /// −(fraction shed this step); never positive.
    pub reward: f64,
    /// 1 iff the post-action state passes the FSA backend.
    pub constraint_c: u8,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Flags that were requested on buses already at the cap.
    pub ignored_flags: Vec<bool>,
}

pub struct UflsEnv<'a> {
    pub shed_buses: Vec<usize>,
    pub stats: StateStats,
    backend: &'a dyn FsaBackend,
}

impl<'a> UflsEnv<'a> {
    pub fn new(base: &Network, count: usize, stats: StateStats, backend: &'a dyn FsaBackend) -> Result<Self> {
        Ok(UflsEnv { shed_buses: select_shed_buses(base, count)?, stats, backend })
    }

    pub fn n_actions(&self) -> usize {
        self.shed_buses.len()
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Uniform draw from a pool of (TDS-verified) unsafe operating points.
    pub fn reset(&self, pool: &[OperatingPoint], rng: &mut ChaCha12Rng) -> Result<EnvState> {
        if pool.is_empty() {
            return Err(Error::InvalidInput("empty unsafe pool".into()));
        }
        let idx = rng.gen_range(0..pool.len());
        Ok(self.reset_to(&pool[idx]))
    }

    pub fn reset_to(&self, op: &OperatingPoint) -> EnvState {
        EnvState::from_operating_point(op, self.shed_buses.len())
    }

    pub fn assemble(&self, state: &EnvState) -> Vec<f64> {
        assemble_state(&state.solution, &self.stats)
    }

    /// Apply the shed flags, re-solve the power flow, and query the FSA
    /// backend. Flags on buses at the 20% cap are skipped and recorded.
    pub fn step(&self, state: &mut EnvState, action: &Action) -> Result<Transition> {
        if action.flags.len() != self.shed_buses.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} action flags", self.shed_buses.len()),
                found: format!("{}", action.flags.len()),
            });
        }
        if state.done || state.step_index >= MAX_EPISODE_STEPS {
            return Err(Error::InvalidInput("episode is already done".into()));
        }

        let before = self.assemble(state);
        let mut reward = 0.0;
        let mut ignored = vec![false; action.flags.len()];
        for (j, &flag) in action.flags.iter().enumerate() {
            if !flag {
                continue;
            }
            if state.cumulative_shed[j] + SHED_STEP_FRACTION > SHED_CAP + 1e-9 {
                ignored[j] = true;
                continue;
            }
            let bus = self.shed_buses[j];
            for (l, load) in state.network.loads.iter_mut().enumerate() {
                if load.bus == bus {
                    let (p0, q0) = state.initial_loads[l];
                    load.p_load = (load.p_load - SHED_STEP_FRACTION * p0).max(0.0);
                    // constant power factor: q_sj = P_sj · q_Lj / p_Lj
                    load.q_load -= SHED_STEP_FRACTION * q0;
                }
            }
            state.cumulative_shed[j] += SHED_STEP_FRACTION;
            reward -= SHED_STEP_FRACTION;
        }

        state.solution = solve_power_flow(&state.network, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let safe = self.backend.assess(&state.network, &state.solution)?;
        state.step_index += 1;
        state.done = safe || state.step_index >= MAX_EPISODE_STEPS;

        Ok(Transition {
            state: before,
            action: action.clone(),
            reward,
            constraint_c: u8::from(safe),
            next_state: self.assemble(state),
            done: state.done,
            ignored_flags: ignored,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_operating_point;

    fn case9() -> Network {
        let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases/case9.json");
        Network::from_file(p).unwrap()
    }

    struct NeverSafe;
    impl FsaBackend for NeverSafe {
        fn assess(&self, _: &Network, _: &PowerFlowSolution) -> Result<bool> {
            Ok(false)
        }
        fn name(&self) -> &'static str {
            "never-safe"
        }
    }

    struct AlwaysSafe;
    impl FsaBackend for AlwaysSafe {
        fn assess(&self, _: &Network, _: &PowerFlowSolution) -> Result<bool> {
            Ok(true)
        }
        fn name(&self) -> &'static str {
            "always-safe"
        }
    }

    #[test]
    fn shed_bus_selection_orders_by_load_then_id() {
        let net = case9();
        // loads: bus4 = 1.25, bus7 = 1.0, bus5 = 0.9
        assert_eq!(select_shed_buses(&net, 3).unwrap(), vec![4, 7, 5]);
        assert!(select_shed_buses(&net, 4).is_err());
    }

    #[test]
    fn tie_breaks_choose_lower_bus_id() {
        let mut net = case9();
        net.loads[1].p_load = 1.25; // bus 5 ties bus 4
        assert_eq!(select_shed_buses(&net, 2).unwrap(), vec![4, 5]);
    }

    #[test]
    fn assembled_state_has_two_entries_per_bus() {
        let net = case9();
        let op = sample_operating_point(&net, 9).unwrap();
        let env =
            UflsEnv::new(&net, 3, StateStats::identity(net.n_buses()), &NeverSafe).unwrap();
        let state = env.reset_to(&op);
        assert_eq!(env.assemble(&state).len(), 2 * net.n_buses());
    }

    #[test]
    fn zero_action_keeps_loads_and_reward() {
        let net = case9();
        let op = sample_operating_point(&net, 10).unwrap();
        let env =
            UflsEnv::new(&net, 3, StateStats::identity(net.n_buses()), &NeverSafe).unwrap();
        let mut state = env.reset_to(&op);
        let p_before = state.p_l();
        let t = env.step(&mut state, &Action { flags: vec![false; 3] }).unwrap();
        assert_eq!(t.reward, 0.0);
        assert_eq!(state.p_l(), p_before);
        assert_eq!(t.constraint_c, 0);
    }

    #[test]
    fn three_flags_cost_fifteen_percent() {
        let net = case9();
        let op = sample_operating_point(&net, 11).unwrap();
        let env =
            UflsEnv::new(&net, 3, StateStats::identity(net.n_buses()), &NeverSafe).unwrap();
        let mut state = env.reset_to(&op);
        let t = env.step(&mut state, &Action { flags: vec![true; 3] }).unwrap();
        assert!((t.reward + 0.15).abs() < 1e-12);
    }

    #[test]
    fn cap_is_reached_after_four_full_sheds_and_episode_ends() {
        let net = case9();
        let op = sample_operating_point(&net, 12).unwrap();
        let env =
            UflsEnv::new(&net, 3, StateStats::identity(net.n_buses()), &NeverSafe).unwrap();
        let mut state = env.reset_to(&op);
        for _ in 0..MAX_EPISODE_STEPS {
            assert!(!state.done);
            env.step(&mut state, &Action { flags: vec![true; 3] }).unwrap();
        }
        assert!(state.done);
        for shed in &state.cumulative_shed {
            assert!((shed - SHED_CAP).abs() < 1e-12);
        }
        // a fifth step is rejected
        assert!(env.step(&mut state, &Action { flags: vec![true; 3] }).is_err());
    }

    #[test]
    fn safe_verdict_terminates_episode() {
        let net = case9();
        let op = sample_operating_point(&net, 13).unwrap();
        let env =
            UflsEnv::new(&net, 3, StateStats::identity(net.n_buses()), &AlwaysSafe).unwrap();
        let mut state = env.reset_to(&op);
        let t = env.step(&mut state, &Action { flags: vec![false; 3] }).unwrap();
        assert_eq!(t.constraint_c, 1);
        assert!(t.done);
    }

    #[test]
    fn combined_reward_is_affine_in_c() {
        assert_eq!(combined_reward(-0.15, 1, 0.0), -0.15);
        assert_eq!(combined_reward(-0.15, 1, 10.0), 9.85);
        assert_eq!(combined_reward(-0.15, 0, 10.0), -0.15);
    }

    #[test]
    fn reset_from_pool_is_seed_deterministic() {
        let net = case9();
        let pool: Vec<_> =
            (0..5).map(|i| sample_operating_point(&net, 100 + i).unwrap()).collect();
        let env =
            UflsEnv::new(&net, 3, StateStats::identity(net.n_buses()), &NeverSafe).unwrap();
        let mut r1 = crate::rng::substream(7, "reset", 0);
        let mut r2 = crate::rng::substream(7, "reset", 0);
        for _ in 0..10 {
            let a = env.reset(&pool, &mut r1).unwrap();
            let b = env.reset(&pool, &mut r2).unwrap();
            assert_eq!(a.solution.voltage_mag, b.solution.voltage_mag);
        }
        assert!(env.reset(&[], &mut r1).is_err());
    }
}
