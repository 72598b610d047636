//! Classification metrics with "safe" as the positive class.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{LabeledDataset, SplitTag};

use super::ClassifierModel;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent.
    pub accuracy: f64,
    /// Percent; 0 with `degenerate_precision` set when nothing is predicted positive.
    pub precision: f64,
    /// Percent.
    pub recall: f64,
    pub train_time_s: f64,
    pub test_time_s: f64,
    pub degenerate_precision: bool,
}

impl Metrics {
    pub fn from_confusion(tp: usize, tn: usize, fp: usize, fn_: usize) -> Metrics {
        let total = tp + tn + fp + fn_;
        let accuracy = 100.0 * (tp + tn) as f64 / total.max(1) as f64;
        let degenerate = tp + fp == 0;
        let precision = if degenerate { 0.0 } else { 100.0 * tp as f64 / (tp + fp) as f64 };
        let recall =
            if tp + fn_ == 0 { 0.0 } else { 100.0 * tp as f64 / (tp + fn_) as f64 };
        Metrics {
            accuracy,
            precision,
            recall,
            train_time_s: 0.0,
            test_time_s: 0.0,
            degenerate_precision: degenerate,
        }
    }
}

/// Evaluate on the rows carrying `tag` (positive class = safe = 1).
pub fn evaluate(model: &ClassifierModel, ds: &LabeledDataset, tag: SplitTag) -> Result<Metrics> {
    let rows = ds.rows_with_tag(tag);
    evaluate_rows(model, ds, &rows)
}

/// Evaluate on an explicit row set.
pub fn evaluate_rows(model: &ClassifierModel, ds: &LabeledDataset, rows: &[usize]) -> Result<Metrics> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("empty evaluation split".into()));
    }
    let started = Instant::now();
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for &r in rows {
        let (_, label) = model.predict(ds.row(r))?;
        match (label, ds.labels[r]) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => unreachable!(),
        }
    }
    let mut m = Metrics::from_confusion(tp, tn, fp, fn_);
    m.test_time_s = started.elapsed().as_secs_f64();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_identities_on_fixed_predictions() {
        // 10 fixed predictions: tp=4 tn=3 fp=2 fn=1
        let m = Metrics::from_confusion(4, 3, 2, 1);
        assert_eq!(m.accuracy, 70.0); // (TP+TN)/M
        assert!((m.precision - 100.0 * 4.0 / 6.0).abs() < 1e-12); // precision·PP = TP
        assert!((m.recall - 80.0).abs() < 1e-12);
        assert!(!m.degenerate_precision);
    }

    #[test]
    fn perfect_predictor_scores_hundreds() {
        let m = Metrics::from_confusion(6, 4, 0, 0);
        assert_eq!((m.accuracy, m.precision, m.recall), (100.0, 100.0, 100.0));
    }

    #[test]
    fn all_positive_predictor_on_65_35_split() {
        let m = Metrics::from_confusion(65, 0, 35, 0);
        assert_eq!(m.accuracy, 65.0);
        assert_eq!(m.recall, 100.0);
    }

    #[test]
    fn no_positive_predictions_flags_degenerate_precision() {
        let m = Metrics::from_confusion(0, 5, 0, 5);
        assert_eq!(m.precision, 0.0);
        assert!(m.degenerate_precision);
    }
}
