//! FSA surrogate classifiers: decision tree, linear SVM, MLP, CNN, and the
//! aggregation GNN, with shared training, evaluation, and persistence.

mod aggregate;
mod metrics;
mod nn;
mod svm;
mod tree;

pub use aggregate::aggregate_signal;
pub use metrics::{evaluate, evaluate_rows, Metrics};
pub use nn::{arch_specs, layout_for, max_degree_buses, train_nn, InputLayout, InputStats,
    NnTrainConfig, NnTrainOutcome, GNN_N_MAX};
pub use svm::{train_svm, LinearSvm, SvmConfig};
pub use tree::{train_decision_tree, DecisionTree, TreeNode};

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::scenario::{LabeledDataset, SplitTag, FEATURES_PER_BUS};
use crate::tensor::{load_checkpoint, save_checkpoint, Checkpoint, FeedForward, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Dt,
    Svm,
    Mlp,
    Cnn,
    Gnn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Dt,
        ClassifierKind::Svm,
        ClassifierKind::Mlp,
        ClassifierKind::Cnn,
        ClassifierKind::Gnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Dt => "dt",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Cnn => "cnn",
            ClassifierKind::Gnn => "gnn",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(ClassifierKind::Dt),
            "svm" => Ok(ClassifierKind::Svm),
            "mlp" => Ok(ClassifierKind::Mlp),
            "cnn" => Ok(ClassifierKind::Cnn),
            "gnn" => Ok(ClassifierKind::Gnn),
            other => Err(Error::InvalidInput(format!("unknown classifier kind {other:?}"))),
        }
    }
}

/// Neural classifier kinds (subset of [`ClassifierKind`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NnKind {
    Mlp = 0,
    Cnn = 1,
    Gnn = 2,
}

/// A trained FSA surrogate.
#[derive(Clone, Debug)]
pub enum ClassifierModel {
    Tree { tree: DecisionTree, n_buses: usize },
    Svm { svm: LinearSvm, n_buses: usize },
    Nn { kind: NnKind, net: FeedForward, layout: InputLayout, stats: InputStats },
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Tree { .. } => ClassifierKind::Dt,
            ClassifierModel::Svm { .. } => ClassifierKind::Svm,
            ClassifierModel::Nn { kind: NnKind::Mlp, .. } => ClassifierKind::Mlp,
            ClassifierModel::Nn { kind: NnKind::Cnn, .. } => ClassifierKind::Cnn,
            ClassifierModel::Nn { kind: NnKind::Gnn, .. } => ClassifierKind::Gnn,
        }
    }

    pub fn n_buses(&self) -> usize {
        match self {
            ClassifierModel::Tree { n_buses, .. } | ClassifierModel::Svm { n_buses, .. } => *n_buses,
            ClassifierModel::Nn { layout, .. } => layout.n_buses(),
        }
    }

    /// Safe-probability and thresholded label for one raw feature row
    /// [v, δ, p, q] × N. Deterministic.
    pub fn predict(&self, features: &[f64]) -> Result<(f64, u8)> {
        let expected = self.n_buses() * FEATURES_PER_BUS;
        if features.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} features"),
                found: format!("{}", features.len()),
            });
        }
        let p = match self {
            ClassifierModel::Tree { tree, .. } => tree.predict_proba(features),
            ClassifierModel::Svm { svm, .. } => svm.predict_proba(features),
            ClassifierModel::Nn { net, layout, stats, .. } => {
                let mut enc = layout.encode(features)?;
                stats.apply(&mut enc);
                let mut shape = vec![1];
                shape.extend(layout.sample_shape());
                let cache = net.forward(&Tensor::new(shape, enc))?;
                cache.output().data[0]
            }
        };
        Ok((p, u8::from(p >= 0.5)))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifierTrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub dt_max_depth: usize,
    pub dt_min_leaf: usize,
    pub svm_epochs: usize,
    pub svm_lr: f64,
    pub svm_regularization: f64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        ClassifierTrainConfig {
            seed: 0,
            epochs: 100,
            lr: 1e-3,
            batch_size: 32,
            dt_max_depth: 12,
            dt_min_leaf: 5,
            svm_epochs: 200,
            svm_lr: 0.01,
            svm_regularization: 1e-4,
        }
    }
}

/// Train one classifier kind on the dataset's train/val splits and measure
/// it on the test split. Returns the model, Table-I-style metrics, and the
/// training loss trend (empty for DT/SVM).
pub fn train_classifier(
    kind: ClassifierKind,
    base: &Network,
    ds: &LabeledDataset,
    cfg: &ClassifierTrainConfig,
) -> Result<(ClassifierModel, Metrics, Vec<f64>)> {
    let train_rows = ds.rows_with_tag(SplitTag::Train);
    if train_rows.is_empty() {
        return Err(Error::InvalidInput("dataset has no train rows".into()));
    }
    let started = Instant::now();
    let (model, curve) = match kind {
        ClassifierKind::Dt => {
            let rows: Vec<&[f64]> = train_rows.iter().map(|&r| ds.row(r)).collect();
            let labels: Vec<u8> = train_rows.iter().map(|&r| ds.labels[r]).collect();
            let tree = train_decision_tree(&rows, &labels, cfg.dt_max_depth, cfg.dt_min_leaf);
            (ClassifierModel::Tree { tree, n_buses: ds.n_buses }, Vec::new())
        }
        ClassifierKind::Svm => {
            let rows: Vec<&[f64]> = train_rows.iter().map(|&r| ds.row(r)).collect();
            let labels: Vec<u8> = train_rows.iter().map(|&r| ds.labels[r]).collect();
            let svm = train_svm(
                &rows,
                &labels,
                &SvmConfig {
                    epochs: cfg.svm_epochs,
                    lr: cfg.svm_lr,
                    regularization: cfg.svm_regularization,
                    seed: cfg.seed,
                },
            );
            (ClassifierModel::Svm { svm, n_buses: ds.n_buses }, Vec::new())
        }
        ClassifierKind::Mlp | ClassifierKind::Cnn | ClassifierKind::Gnn => {
            let nn_kind = match kind {
                ClassifierKind::Mlp => NnKind::Mlp,
                ClassifierKind::Cnn => NnKind::Cnn,
                _ => NnKind::Gnn,
            };
            let out = train_nn(
                nn_kind,
                base,
                ds,
                &NnTrainConfig {
                    epochs: cfg.epochs,
                    lr: cfg.lr,
                    batch_size: cfg.batch_size,
                    seed: cfg.seed,
                },
            )?;
            (
                ClassifierModel::Nn {
                    kind: nn_kind,
                    net: out.net,
                    layout: out.layout,
                    stats: out.stats,
                },
                out.train_loss,
            )
        }
    };
    let train_time = started.elapsed().as_secs_f64();

    let mut metrics = evaluate(&model, ds, SplitTag::Test)?;
    metrics.train_time_s = train_time;
    Ok((model, metrics, curve))
}

/// Serialized form for tree/SVM models; neural models use checkpoints.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FlatModel {
    Dt { n_buses: usize, tree: DecisionTree },
    Svm { n_buses: usize, svm: LinearSvm },
}

/// Save a model under `<stem>.json` (+ `<stem>.bin` for neural kinds).
pub fn save_model(stem: impl AsRef<Path>, model: &ClassifierModel, seed: u64) -> Result<()> {
    let stem = stem.as_ref();
    match model {
        ClassifierModel::Tree { tree, n_buses } => {
            write_flat(stem, &FlatModel::Dt { n_buses: *n_buses, tree: tree.clone() })
        }
        ClassifierModel::Svm { svm, n_buses } => {
            write_flat(stem, &FlatModel::Svm { n_buses: *n_buses, svm: svm.clone() })
        }
        ClassifierModel::Nn { kind, net, layout, stats } => {
            let mut extra = serde_json::Map::new();
            extra.insert("classifier".into(), model.kind().name().into());
            extra.insert("n_buses".into(), (layout.n_buses() as u64).into());
            extra.insert("input_stats".into(), serde_json::to_value(stats)?);
            if let InputLayout::Aggregated { shift, node, n_max, .. } = layout {
                extra.insert("aggregation_node".into(), (*node as u64).into());
                extra.insert("n_max".into(), (*n_max as u64).into());
                let rows: Vec<Vec<f64>> = (0..shift.nrows())
                    .map(|r| (0..shift.ncols()).map(|c| shift[(r, c)]).collect())
                    .collect();
                extra.insert("shift".into(), serde_json::to_value(rows)?);
            }
            let _ = kind;
            let meta = Checkpoint {
                architecture: net.specs.clone(),
                seed,
                step_count: 0,
                extra,
            };
            save_checkpoint(stem, net, &meta)
        }
    }
}

fn write_flat(stem: &Path, flat: &FlatModel) -> Result<()> {
    let mut path = stem.to_path_buf();
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.set_file_name(format!("{name}.json"));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string(flat)?)?;
    Ok(())
}

/// Load a model saved by [`save_model`].
pub fn load_model(stem: impl AsRef<Path>) -> Result<ClassifierModel> {
    let stem = stem.as_ref();
    let mut json_path = stem.to_path_buf();
    let name = json_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    json_path.set_file_name(format!("{name}.json"));
    let text = std::fs::read_to_string(&json_path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("dt") | Some("svm") => match serde_json::from_value::<FlatModel>(value)? {
            FlatModel::Dt { n_buses, tree } => Ok(ClassifierModel::Tree { tree, n_buses }),
            FlatModel::Svm { n_buses, svm } => Ok(ClassifierModel::Svm { svm, n_buses }),
        },
        _ => {
            let (net, meta) = load_checkpoint(stem)?;
            let classifier = meta
                .extra
                .get("classifier")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::InvalidInput("checkpoint missing classifier kind".into()))?;
            let n_buses = meta
                .extra
                .get("n_buses")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::InvalidInput("checkpoint missing n_buses".into()))?
                as usize;
            let stats: InputStats = serde_json::from_value(
                meta.extra
                    .get("input_stats")
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput("checkpoint missing input stats".into()))?,
            )?;
            let (kind, layout) = match classifier {
                "mlp" => (NnKind::Mlp, InputLayout::Flat { n_buses }),
                "cnn" => (NnKind::Cnn, InputLayout::BusChannels { n_buses }),
                "gnn" => {
                    let node = meta.extra.get("aggregation_node").and_then(|v| v.as_u64()).unwrap_or(0)
                        as usize;
                    let n_max =
                        meta.extra.get("n_max").and_then(|v| v.as_u64()).unwrap_or(GNN_N_MAX as u64)
                            as usize;
                    let rows: Vec<Vec<f64>> = serde_json::from_value(
                        meta.extra
                            .get("shift")
                            .cloned()
                            .ok_or_else(|| Error::InvalidInput("gnn checkpoint missing shift".into()))?,
                    )?;
                    let shift = DMatrix::from_fn(rows.len(), rows.len(), |r, c| rows[r][c]);
                    (NnKind::Gnn, InputLayout::Aggregated { n_buses, shift, node, n_max })
                }
                other => {
                    return Err(Error::InvalidInput(format!("unknown classifier kind {other:?}")))
                }
            };
            Ok(ClassifierModel::Nn { kind, net, layout, stats })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case9() -> Network {
        let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases/case9.json");
        Network::from_file(p).unwrap()
    }

    fn synthetic_ds(base: &Network, m: usize, seed: u64) -> LabeledDataset {
        use rand::Rng;
        let n = base.n_buses();
        let mut rng = crate::rng::substream(seed, "clf-ds", 0);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..m {
            let label: u8 = rng.gen_range(0..2);
            let offset = f64::from(label) * 0.5;
            for _ in 0..n {
                features.push(1.0 + offset + rng.gen_range(-0.05..0.05)); // v
                features.push(rng.gen_range(-0.3..0.3)); // δ
                features.push(offset + rng.gen_range(-0.2..0.2)); // p
                features.push(rng.gen_range(-0.2..0.2)); // q
            }
            labels.push(label);
        }
        let mut ds = LabeledDataset { n_buses: n, features, labels, tags: vec![SplitTag::Train; m] };
        crate::scenario::split_dataset(&mut ds, (0.75, 0.15, 0.10), seed);
        ds
    }

    #[test]
    fn every_kind_trains_and_predicts_deterministically() {
        let base = case9();
        let ds = synthetic_ds(&base, 60, 3);
        let cfg = ClassifierTrainConfig { epochs: 3, ..Default::default() };
        for kind in ClassifierKind::ALL {
            let (model, metrics, _) = train_classifier(kind, &base, &ds, &cfg).unwrap();
            let (p1, l1) = model.predict(ds.row(0)).unwrap();
            let (p2, l2) = model.predict(ds.row(0)).unwrap();
            assert_eq!(p1, p2);
            assert_eq!(l1, l2);
            assert!((0.0..=100.0).contains(&metrics.accuracy));
        }
    }

    #[test]
    fn model_files_roundtrip_with_identical_predictions() {
        let base = case9();
        let ds = synthetic_ds(&base, 60, 4);
        let cfg = ClassifierTrainConfig { epochs: 2, ..Default::default() };
        let dir = tempfile::tempdir().unwrap();
        for kind in ClassifierKind::ALL {
            let (model, _, _) = train_classifier(kind, &base, &ds, &cfg).unwrap();
            let stem = dir.path().join(kind.name());
            save_model(&stem, &model, 4).unwrap();
            let back = load_model(&stem).unwrap();
            for r in 0..5 {
                let a = model.predict(ds.row(r)).unwrap();
                let b = back.predict(ds.row(r)).unwrap();
                assert_eq!(a, b, "{kind:?} row {r}");
            }
        }
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let base = case9();
        let ds = synthetic_ds(&base, 40, 5);
        let cfg = ClassifierTrainConfig { epochs: 1, ..Default::default() };
        let (model, _, _) = train_classifier(ClassifierKind::Dt, &base, &ds, &cfg).unwrap();
        assert!(model.predict(&[1.0, 2.0]).is_err());
    }
}
