//! Ground-truth frequency security assessment by time-domain simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Network, PowerFlowSolution};

use super::integrate::{frequency_nadir, integrate_swing, SimParams};
use super::model::DynamicModel;
use super::Contingency;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FsaThresholds {
    /// Safe requires f_min strictly above this, Hz.
    pub f_min: f64,
    /// Safe requires f_max strictly below this, Hz.
    pub f_max: f64,
}

impl Default for FsaThresholds {
    fn default() -> Self {
        FsaThresholds { f_min: 59.5, f_max: 60.5 }
    }
}

impl FsaThresholds {
    /// Strict inequalities: an extremum exactly on a threshold is unsafe.
    pub fn is_safe(&self, f_min: f64, f_max: f64) -> bool {
        f_min > self.f_min && f_max < self.f_max
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContingencyExtremes {
    pub contingency: usize,
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FsaVerdict {
    pub safe: bool,
    pub per_contingency: Vec<ContingencyExtremes>,
}

impl FsaVerdict {
    /// Most severe violating contingency, by threshold exceedance in Hz.
    pub fn binding_contingency(&self, thresholds: FsaThresholds) -> Option<usize> {
        self.per_contingency
            .iter()
            .filter(|e| !thresholds.is_safe(e.f_min, e.f_max))
            .max_by(|a, b| {
                let sev = |e: &ContingencyExtremes| {
                    (thresholds.f_min - e.f_min).max(e.f_max - thresholds.f_max)
                };
                sev(a).total_cmp(&sev(b))
            })
            .map(|e| e.contingency)
    }
}

/// Run every contingency on the operating point and aggregate: safe iff all
/// extrema are inside the thresholds. An empty contingency set is vacuously
/// safe.
pub fn run_fsa_tds(
    net: &Network,
    sol: &PowerFlowSolution,
    contingencies: &[Contingency],
    thresholds: FsaThresholds,
    params: SimParams,
) -> Result<FsaVerdict> {
    let model = DynamicModel::new(net, sol)?;
    let per_contingency: Vec<ContingencyExtremes> = contingencies
        .par_iter()
        .enumerate()
        .map(|(idx, c)| -> Result<ContingencyExtremes> {
            let traj = integrate_swing(&model, Some(c), params)?;
            let (f_min, f_max) = frequency_nadir(&traj)?;
            Ok(ContingencyExtremes { contingency: idx, f_min, f_max })
        })
        .collect::<Result<Vec<_>>>()?;
    let safe = per_contingency.iter().all(|e| thresholds.is_safe(e.f_min, e.f_max));
    Ok(FsaVerdict { safe, per_contingency })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_extremum_is_unsafe() {
        let t = FsaThresholds::default();
        assert!(!t.is_safe(59.5, 60.0));
        assert!(!t.is_safe(60.0, 60.5));
        assert!(t.is_safe(59.500001, 60.499999));
    }

    #[test]
    fn binding_contingency_picks_most_severe() {
        let v = FsaVerdict {
            safe: false,
            per_contingency: vec![
                ContingencyExtremes { contingency: 0, f_min: 59.4, f_max: 60.1 },
                ContingencyExtremes { contingency: 1, f_min: 58.9, f_max: 60.2 },
                ContingencyExtremes { contingency: 2, f_min: 59.8, f_max: 60.1 },
            ],
        };
        assert_eq!(v.binding_contingency(FsaThresholds::default()), Some(1));
    }
}
