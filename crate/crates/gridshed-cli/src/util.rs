//! Shared loading, backend construction, and CSV helpers.

use std::path::Path;

use anyhow::{bail, Context, Result};

use gridshed_core::classifiers::{load_model, ClassifierKind};
use gridshed_core::dynamics::{Contingency, FsaThresholds, SimParams};
use gridshed_core::env::{FsaBackend, StateStats, SurrogateBackend, TdsBackend};
use gridshed_core::grid::Network;
use gridshed_core::scenario::{
    operating_point_for_row, read_dataset, DatasetManifest, LabeledDataset, OperatingPoint,
    SplitTag,
};
use gridshed_core::util::sha256_hex;

pub fn load_case(path: impl AsRef<Path>) -> Result<(Network, String)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading case {}", path.display()))?;
    let net = Network::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((net, text))
}

pub fn load_contingency_file(path: impl AsRef<Path>) -> Result<(Vec<Contingency>, String)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading contingencies {}", path.display()))?;
    let list: Vec<Contingency> = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((list, text))
}

/// Read a dataset directory and verify its provenance against the case and
/// contingency files in use.
pub fn load_dataset_checked(
    dir: impl AsRef<Path>,
    case_text: &str,
    contingency_text: Option<&str>,
) -> Result<(LabeledDataset, DatasetManifest)> {
    let (ds, manifest) = read_dataset(&dir)
        .with_context(|| format!("reading dataset {}", dir.as_ref().display()))?;
    if sha256_hex(case_text.as_bytes()) != manifest.case_hash {
        bail!("case file does not match the dataset manifest (hash mismatch)");
    }
    if let Some(ct) = contingency_text {
        if sha256_hex(ct.as_bytes()) != manifest.contingency_hash {
            bail!("contingency file does not match the dataset manifest (hash mismatch)");
        }
    }
    Ok((ds, manifest))
}

/// Deterministically rebuild the operating points of the dataset's unsafe
/// rows, split into (eval set, training pool).
pub fn unsafe_pool(
    base: &Network,
    ds: &LabeledDataset,
    manifest: &DatasetManifest,
    eval_points: usize,
) -> Result<(Vec<OperatingPoint>, Vec<OperatingPoint>)> {
    let unsafe_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.labels[r] == 0).collect();
    if unsafe_rows.is_empty() {
        bail!("dataset has no unsafe rows; nothing to shed for");
    }
    let ops: Vec<OperatingPoint> = unsafe_rows
        .iter()
        .map(|&r| operating_point_for_row(base, manifest.seed, r).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let n_eval = eval_points.min(ops.len() / 2).max(1);
    let (eval, train) = ops.split_at(n_eval);
    Ok((eval.to_vec(), train.to_vec()))
}

pub fn default_sim() -> SimParams {
    SimParams::default()
}

pub fn default_thresholds() -> FsaThresholds {
    FsaThresholds::default()
}

/// Construct an FSA backend by name. `ckpt` is required for surrogates;
/// `mask` applies missing data at evaluation time.
pub fn build_backend(
    name: &str,
    contingencies: &[Contingency],
    ckpt: Option<&Path>,
    mask: Option<(f64, u64)>,
) -> Result<Box<dyn FsaBackend>> {
    if name == "tds" {
        anyhow::ensure!(mask.is_none(), "masking applies to surrogate backends only");
        return Ok(Box::new(TdsBackend {
            contingencies: contingencies.to_vec(),
            thresholds: default_thresholds(),
            sim: default_sim(),
        }));
    }
    let kind: ClassifierKind = name.parse()?;
    let stem = ckpt.with_context(|| format!("backend {name} needs --fsa-ckpt"))?;
    let model = load_model(stem)
        .with_context(|| format!("loading {} checkpoint {}", kind.name(), stem.display()))?;
    anyhow::ensure!(
        model.kind() == kind,
        "checkpoint {} holds a {} model, expected {}",
        stem.display(),
        model.kind().name(),
        kind.name()
    );
    Ok(Box::new(match mask {
        Some((fraction, seed)) => SurrogateBackend::with_mask_fraction(model, fraction, seed),
        None => SurrogateBackend::new(model),
    }))
}

pub fn state_stats(ds: &LabeledDataset) -> StateStats {
    StateStats::from_dataset(ds, &ds.rows_with_tag(SplitTag::Train))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
