//! Operating-point sampling and labeled-dataset generation for FSA
//! classifiers: uniform dispatch/load scaling, TDS labeling, splitting, and
//! missing-data masking.

mod dataset;
mod io;

pub use dataset::{
    generate_dataset, mask_buses, split_dataset, FeatureStats, LabeledDataset, SplitTag,
    FEATURES_PER_BUS,
};
pub use io::{read_dataset, write_dataset, DatasetManifest};

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::grid::{solve_power_flow, Network, PowerFlowSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::substream;

pub const GEN_SCALE_RANGE: (f64, f64) = (0.7, 1.2);
pub const LOAD_SCALE_RANGE: (f64, f64) = (0.9, 1.5);
const MAX_SAMPLE_ATTEMPTS: usize = 50;

/// A randomly scaled, solved operating point.
#[derive(Clone, Debug)]
pub struct OperatingPoint {
    /// Per-generator dispatch factor drawn from U(0.7, 1.2). The slack
    /// machine's factor is drawn but its dispatch is set by the power flow.
    pub gen_scale: Vec<f64>,
    /// Per-load factor drawn from U(0.9, 1.5), applied to both p and q.
    pub load_scale: Vec<f64>,
    pub network: Network,
    pub solution: PowerFlowSolution,
}

impl OperatingPoint {
    /// Per-bus feature row [v, δ, p, q] × N.
    pub fn features(&self) -> Vec<f64> {
        features_of(&self.network, &self.solution)
    }
}

pub fn features_of(net: &Network, sol: &PowerFlowSolution) -> Vec<f64> {
    let n = net.n_buses();
    let mut out = Vec::with_capacity(n * FEATURES_PER_BUS);
    for b in 0..n {
        out.push(sol.voltage_mag[b]);
        out.push(sol.voltage_ang[b]);
        out.push(sol.p_net[b]);
        out.push(sol.q_net[b]);
    }
    out
}

/// Scale generator dispatch (non-slack) and loads of a base case.
pub fn apply_scales(base: &Network, gen_scale: &[f64], load_scale: &[f64]) -> Network {
    let mut net = base.clone();
    let slack = base.slack_bus();
    for (g, s) in net.generators.iter_mut().zip(gen_scale) {
        if g.bus != slack {
            g.p_mech *= s;
        }
    }
    for (l, s) in net.loads.iter_mut().zip(load_scale) {
        l.p_load *= s;
        l.q_load *= s;
    }
    net
}

fn sample_with_rng(base: &Network, rng: &mut ChaCha12Rng) -> Result<OperatingPoint> {
    let gen_scale: Vec<f64> = (0..base.generators.len())
        .map(|_| rng.gen_range(GEN_SCALE_RANGE.0..GEN_SCALE_RANGE.1))
        .collect();
    let load_scale: Vec<f64> = (0..base.loads.len())
        .map(|_| rng.gen_range(LOAD_SCALE_RANGE.0..LOAD_SCALE_RANGE.1))
        .collect();
    let network = apply_scales(base, &gen_scale, &load_scale);
    let solution = solve_power_flow(&network, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(OperatingPoint { gen_scale, load_scale, network, solution })
}

/// Draw one solvable operating point; divergent power flows are resampled
/// up to a bounded number of attempts.
pub fn sample_operating_point(base: &Network, seed: u64) -> Result<OperatingPoint> {
    let mut rng = substream(seed, "operating-point", 0);
    sample_bounded(base, &mut rng)
}

pub(crate) fn sample_bounded(base: &Network, rng: &mut ChaCha12Rng) -> Result<OperatingPoint> {
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        match sample_with_rng(base, rng) {
            Ok(op) => return Ok(op),
            Err(Error::PowerFlowDiverged { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SamplingExhausted { attempts: MAX_SAMPLE_ATTEMPTS })
}

/// Deterministically re-derive the operating point used for dataset row `row`.
pub fn operating_point_for_row(base: &Network, seed: u64, row: usize) -> Result<OperatingPoint> {
    let mut rng = substream(seed, "dataset-row", row as u64);
    sample_bounded(base, &mut rng)
}
