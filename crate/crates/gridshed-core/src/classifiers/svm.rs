//! Linear SVM trained by hinge-loss SGD on z-scored features.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::substream;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// z-score statistics from the training split.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LinearSvm {
    /// Signed margin of a raw (unstandardized) row.
    pub fn margin(&self, row: &[f64]) -> f64 {
        let mut m = self.bias;
        for i in 0..row.len() {
            m += self.weights[i] * (row[i] - self.mean[i]) / self.std[i];
        }
        m
    }

    /// Squashed margin as a probability proxy.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.margin(row)).exp())
    }
}

pub struct SvmConfig {
    pub epochs: usize,
    pub lr: f64,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { epochs: 200, lr: 0.01, regularization: 1e-4, seed: 0 }
    }
}

/// Hinge-loss SGD with L2 regularization; labels are {0, 1}.
pub fn train_svm(rows: &[&[f64]], labels: &[u8], cfg: &SvmConfig) -> LinearSvm {
    assert_eq!(rows.len(), labels.len());
    assert!(!rows.is_empty(), "empty training set");
    let n_features = rows[0].len();
    let m = rows.len() as f64;

    let mut mean = vec![0.0; n_features];
    for row in rows {
        for (c, v) in row.iter().enumerate() {
            mean[c] += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut std = vec![0.0; n_features];
    for row in rows {
        for (c, v) in row.iter().enumerate() {
            std[c] += (v - mean[c]).powi(2);
        }
    }
    for v in &mut std {
        *v = (*v / m).sqrt();
        if *v < 1e-9 {
            *v = 1.0; // constant feature contributes nothing after centering
        }
    }

    let z = |row: &[f64], c: usize| (row[c] - mean[c]) / std[c];
    let mut w = vec![0.0; n_features];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = substream(cfg.seed, "svm", 0);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let y = if labels[i] == 1 { 1.0 } else { -1.0 };
            let mut margin = b;
            for c in 0..n_features {
                margin += w[c] * z(rows[i], c);
            }
            if y * margin < 1.0 {
                for c in 0..n_features {
                    w[c] += cfg.lr * (y * z(rows[i], c) - cfg.regularization * w[c]);
                }
                b += cfg.lr * y;
            } else {
                for wc in &mut w {
                    *wc -= cfg.lr * cfg.regularization * *wc;
                }
            }
        }
    }

    LinearSvm { weights: w, bias: b, mean, std }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn two_separable_points_get_positive_margins() {
        let rows: Vec<&[f64]> = vec![&[-1.0], &[1.0]];
        let svm = train_svm(&rows, &[0, 1], &SvmConfig::default());
        assert!(svm.margin(&[1.0]) > 0.0);
        assert!(svm.margin(&[-1.0]) < 0.0);
    }

    #[test]
    fn identical_features_fall_back_to_majority_bias() {
        let rows: Vec<&[f64]> = vec![&[2.0], &[2.0], &[2.0], &[2.0], &[2.0]];
        let svm = train_svm(&rows, &[1, 1, 1, 0, 1], &SvmConfig::default());
        // constant feature: prediction is the bias sign = majority class
        assert!(svm.predict_proba(&[2.0]) >= 0.5);
        assert!(svm.weights[0].abs() < 1e-6);
    }

    #[test]
    fn well_separated_blobs_classify_cleanly() {
        let mut rng = crate::rng::substream(17, "svm-blobs", 0);
        let mut data: Vec<(Vec<f64>, u8)> = Vec::new();
        for _ in 0..200 {
            let cls: u8 = rng.gen_range(0..2);
            let center = if cls == 1 { 2.0 } else { -2.0 };
            // σ = 1, centers 4σ apart
            let x = center + rng.gen_range(-1.0..1.0);
            let y = center + rng.gen_range(-1.0..1.0);
            data.push((vec![x, y], cls));
        }
        let (train, test) = data.split_at(150);
        let rows: Vec<&[f64]> = train.iter().map(|(r, _)| r.as_slice()).collect();
        let labels: Vec<u8> = train.iter().map(|(_, l)| *l).collect();
        let svm = train_svm(&rows, &labels, &SvmConfig::default());
        let correct = test
            .iter()
            .filter(|(r, l)| u8::from(svm.predict_proba(r) >= 0.5) == *l)
            .count();
        assert!(correct as f64 / test.len() as f64 >= 0.99, "{correct}/{}", test.len());
    }

    #[test]
    fn epoch_averaged_hinge_objective_decreases() {
        let mut rng = crate::rng::substream(18, "svm-hinge", 0);
        let mut data: Vec<(Vec<f64>, u8)> = Vec::new();
        for _ in 0..120 {
            let cls: u8 = rng.gen_range(0..2);
            let c = if cls == 1 { 1.0 } else { -1.0 };
            data.push((vec![c + rng.gen_range(-1.5..1.5), c + rng.gen_range(-1.5..1.5)], cls));
        }
        let rows: Vec<&[f64]> = data.iter().map(|(r, _)| r.as_slice()).collect();
        let labels: Vec<u8> = data.iter().map(|(_, l)| *l).collect();
        let objective = |svm: &LinearSvm| -> f64 {
            data.iter()
                .map(|(r, l)| {
                    let y = if *l == 1 { 1.0 } else { -1.0 };
                    (1.0 - y * svm.margin(r)).max(0.0)
                })
                .sum::<f64>()
                / data.len() as f64
        };
        let early = train_svm(&rows, &labels, &SvmConfig { epochs: 1, ..Default::default() });
        let late = train_svm(&rows, &labels, &SvmConfig::default());
        assert!(objective(&late) <= objective(&early) + 1e-9);
    }
}
