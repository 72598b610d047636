//! Labeled datasets: generation, splitting, and masking.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_fsa_tds, Contingency, FsaThresholds, SimParams};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::rng::substream;

use super::operating_point_for_row;

/// Feature columns per bus: v, δ, p, q.
pub const FEATURES_PER_BUS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitTag::Train => write!(f, "train"),
            SplitTag::Val => write!(f, "val"),
            SplitTag::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for SplitTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            other => Err(Error::InvalidInput(format!("unknown split tag {other:?}"))),
        }
    }
}

/// Per-operating-point feature matrix with binary safe/unsafe labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub n_buses: usize,
    /// M × (N × 4) row-major; per bus [v, δ, p, q].
    pub features: Vec<f64>,
    /// 1 = safe for all contingencies, 0 = unsafe.
    pub labels: Vec<u8>,
    pub tags: Vec<SplitTag>,
}

impl LabeledDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row_len(&self) -> usize {
        self.n_buses * FEATURES_PER_BUS
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn rows_with_tag(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.tags[i] == tag).collect()
    }

    /// (safe, unsafe) row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let safe = self.labels.iter().filter(|&&l| l == 1).count();
        (safe, self.labels.len() - safe)
    }

    /// Column means and standard deviations over the train split.
    pub fn train_stats(&self) -> FeatureStats {
        let rows = self.rows_with_tag(SplitTag::Train);
        FeatureStats::from_rows(self, &rows)
    }
}

/// Per-column standardization statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn from_rows(ds: &LabeledDataset, rows: &[usize]) -> FeatureStats {
        let w = ds.row_len();
        let mut mean = vec![0.0; w];
        let mut std = vec![0.0; w];
        if rows.is_empty() {
            return FeatureStats { mean, std: vec![1.0; w] };
        }
        for &r in rows {
            for (c, v) in ds.row(r).iter().enumerate() {
                mean[c] += v;
            }
        }
        for m in &mut mean {
            *m /= rows.len() as f64;
        }
        for &r in rows {
            for (c, v) in ds.row(r).iter().enumerate() {
                std[c] += (v - mean[c]).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / rows.len() as f64).sqrt();
            if *s < 1e-9 {
                *s = 1.0; // constant column: leave centered values at zero
            }
        }
        FeatureStats { mean, std }
    }

    pub fn standardize(&self, row: &mut [f64]) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v - self.mean[c]) / self.std[c];
        }
    }
}

/// Sample `m` operating points, label each with the TDS verdict over the
/// contingency set, and store the pre-contingency solved state as features.
/// Rows are independent sub-streams of `seed`, so results do not depend on
/// the parallel schedule.
pub fn generate_dataset(
    base: &Network,
    contingencies: &[Contingency],
    m: usize,
    seed: u64,
    thresholds: FsaThresholds,
    sim: SimParams,
) -> Result<LabeledDataset> {
    if m == 0 {
        return Err(Error::InvalidInput("dataset size must be at least 1".into()));
    }
    for c in contingencies {
        c.validate(base)?;
    }
    let rows: Vec<(Vec<f64>, u8)> = (0..m)
        .into_par_iter()
        .map(|row| -> Result<(Vec<f64>, u8)> {
            let op = operating_point_for_row(base, seed, row)?;
            let verdict =
                run_fsa_tds(&op.network, &op.solution, contingencies, thresholds, sim)?;
            Ok((op.features(), u8::from(verdict.safe)))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_buses = base.n_buses();
    let mut features = Vec::with_capacity(m * n_buses * FEATURES_PER_BUS);
    let mut labels = Vec::with_capacity(m);
    for (f, l) in rows {
        features.extend_from_slice(&f);
        labels.push(l);
    }
    Ok(LabeledDataset { n_buses, features, labels, tags: vec![SplitTag::Train; m] })
}

/// Tag rows train/val/test by a seeded permutation with contiguous
/// assignment; flooring remainders go to train.
pub fn split_dataset(ds: &mut LabeledDataset, fractions: (f64, f64, f64), seed: u64) {
    let m = ds.n_rows();
    let n_val = (fractions.1 * m as f64).floor() as usize;
    let n_test = (fractions.2 * m as f64).floor() as usize;
    let n_train = m - n_val - n_test;

    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = substream(seed, "split", 0);
    order.shuffle(&mut rng);

    for (pos, &row) in order.iter().enumerate() {
        ds.tags[row] = if pos < n_train {
            SplitTag::Train
        } else if pos < n_train + n_val {
            SplitTag::Val
        } else {
            SplitTag::Test
        };
    }
}

/// Zero all four feature columns at ⌊fraction·N⌋ distinct buses (the same
/// buses in every row). Returns the masked copy and the per-bus mask.
pub fn mask_buses(
    features: &[f64],
    n_buses: usize,
    fraction: f64,
    seed: u64,
) -> (Vec<f64>, Vec<bool>) {
    assert!((0.0..1.0).contains(&fraction), "fraction must be in [0, 1)");
    let k = (fraction * n_buses as f64).floor() as usize;
    let mut ids: Vec<usize> = (0..n_buses).collect();
    let mut rng = substream(seed, "mask", 0);
    // partial Fisher-Yates: first k entries are the masked buses
    for i in 0..k {
        let j = rng.gen_range(i..n_buses);
        ids.swap(i, j);
    }
    let mut mask = vec![false; n_buses];
    for &b in &ids[..k] {
        mask[b] = true;
    }
    let w = n_buses * FEATURES_PER_BUS;
    let mut out = features.to_vec();
    for row in 0..(features.len() / w) {
        for b in 0..n_buses {
            if mask[b] {
                for c in 0..FEATURES_PER_BUS {
                    out[row * w + b * FEATURES_PER_BUS + c] = 0.0;
                }
            }
        }
    }
    (out, mask)
}
