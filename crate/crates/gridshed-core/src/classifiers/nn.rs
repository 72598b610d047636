//! Neural FSA classifiers: MLP, CNN over the bus axis, and the aggregation
//! GNN, trained with Adam on binary cross entropy.
//!
//! Encoded inputs are z-scored with statistics from the training split (the
//! same treatment for every kind). The GNN's aggregation node is the
//! highest-degree bus; degree ties are resolved by validation loss.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::grid::{graph_shift_operator, Network, ShiftKind};
use crate::rng::substream;
use crate::scenario::{LabeledDataset, SplitTag, FEATURES_PER_BUS};
use crate::tensor::{adam_step, bce_loss, AdamState, FeedForward, LayerParams, LayerSpec, Tensor};

use super::aggregate::aggregate_signal;
use super::NnKind;

/// Aggregation length N_max for the GNN input.
pub const GNN_N_MAX: usize = 3;

/// CNN channel ladder; blocks are applied while the bus axis is long enough.
const CNN_CHANNELS: [usize; 4] = [8, 16, 32, 64];
const CNN_KERNEL: usize = 3;
const CNN_POOL: usize = 2;

/// Feature layout adapters between flat per-bus rows and network inputs.
#[derive(Clone, Debug)]
pub enum InputLayout {
    /// Flat (N×4) vector.
    Flat { n_buses: usize },
    /// (4 channels, N buses).
    BusChannels { n_buses: usize },
    /// Aggregation sequence at one node: (4 channels, N_max).
    Aggregated { n_buses: usize, shift: DMatrix<f64>, node: usize, n_max: usize },
}

impl InputLayout {
    pub fn n_buses(&self) -> usize {
        match self {
            InputLayout::Flat { n_buses }
            | InputLayout::BusChannels { n_buses }
            | InputLayout::Aggregated { n_buses, .. } => *n_buses,
        }
    }

    /// Per-sample input shape fed to the network.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self {
            InputLayout::Flat { n_buses } => vec![n_buses * FEATURES_PER_BUS],
            InputLayout::BusChannels { n_buses } => vec![FEATURES_PER_BUS, *n_buses],
            InputLayout::Aggregated { n_max, .. } => vec![FEATURES_PER_BUS, *n_max],
        }
    }

    /// Convert one raw feature row into the network's input layout.
    pub fn encode(&self, row: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_buses();
        if row.len() != n * FEATURES_PER_BUS {
            return Err(Error::ShapeMismatch {
                expected: format!("{} features", n * FEATURES_PER_BUS),
                found: format!("{}", row.len()),
            });
        }
        match self {
            InputLayout::Flat { .. } => Ok(row.to_vec()),
            InputLayout::BusChannels { n_buses } => {
                let mut out = vec![0.0; row.len()];
                for b in 0..*n_buses {
                    for c in 0..FEATURES_PER_BUS {
                        out[c * n_buses + b] = row[b * FEATURES_PER_BUS + c];
                    }
                }
                Ok(out)
            }
            InputLayout::Aggregated { shift, node, n_max, .. } => {
                let z = aggregate_signal(shift, row, FEATURES_PER_BUS, *node, *n_max)?;
                // z is (n_max, features); the network wants (features, n_max)
                let mut out = vec![0.0; z.len()];
                for k in 0..*n_max {
                    for f in 0..FEATURES_PER_BUS {
                        out[f * n_max + k] = z[k * FEATURES_PER_BUS + f];
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Standardized values are clamped here: in-distribution inputs stay well
/// inside the bound, while zero-filled missing-data inputs on tight columns
/// would otherwise reach hundreds of standard deviations and saturate the
/// network.
const Z_CLIP: f64 = 8.0;

/// Column z-scoring of encoded inputs, fitted on the training split.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct InputStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputStats {
    pub fn identity(width: usize) -> Self {
        InputStats { mean: vec![0.0; width], std: vec![1.0; width] }
    }

    fn fit(encoded: &[Vec<f64>], rows: &[usize]) -> Self {
        let w = encoded.first().map(Vec::len).unwrap_or(0);
        let mut mean = vec![0.0; w];
        let mut std = vec![0.0; w];
        if rows.is_empty() {
            return InputStats::identity(w);
        }
        for &r in rows {
            for c in 0..w {
                mean[c] += encoded[r][c];
            }
        }
        for v in &mut mean {
            *v /= rows.len() as f64;
        }
        for &r in rows {
            for c in 0..w {
                std[c] += (encoded[r][c] - mean[c]).powi(2);
            }
        }
        for v in &mut std {
            *v = (*v / rows.len() as f64).sqrt();
            if *v < 1e-9 {
                *v = 1.0;
            }
        }
        InputStats { mean, std }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = ((*v - self.mean[c]) / self.std[c]).clamp(-Z_CLIP, Z_CLIP);
        }
    }
}

/// Network layer stack for a kind on an N-bus case.
pub fn arch_specs(kind: NnKind, n_buses: usize) -> Result<Vec<LayerSpec>> {
    match kind {
        NnKind::Mlp => Ok(vec![
            LayerSpec::Dense { inputs: n_buses * FEATURES_PER_BUS, outputs: 128 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 128, outputs: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 64, outputs: 1 },
            LayerSpec::Sigmoid,
        ]),
        NnKind::Cnn => {
            let mut specs = Vec::new();
            let mut channels = FEATURES_PER_BUS;
            let mut length = n_buses;
            for out_channels in CNN_CHANNELS {
                if length < CNN_KERNEL {
                    break;
                }
                specs.push(LayerSpec::Conv1d {
                    in_channels: channels,
                    out_channels,
                    kernel: CNN_KERNEL,
                });
                specs.push(LayerSpec::Relu);
                channels = out_channels;
                length = length - CNN_KERNEL + 1;
                if length >= CNN_POOL {
                    specs.push(LayerSpec::MaxPool1d { width: CNN_POOL });
                    length /= CNN_POOL;
                }
            }
            if specs.is_empty() {
                return Err(Error::InvalidInput(format!("{n_buses}-bus case too small for the CNN")));
            }
            specs.push(LayerSpec::Dense { inputs: channels * length, outputs: 64 });
            specs.push(LayerSpec::Relu);
            specs.push(LayerSpec::Dense { inputs: 64, outputs: 1 });
            specs.push(LayerSpec::Sigmoid);
            Ok(specs)
        }
        NnKind::Gnn => {
            let conv_out = 16 * (GNN_N_MAX - 2 + 1); // kernel 2 over the aggregation axis
            Ok(vec![
                LayerSpec::Conv1d { in_channels: FEATURES_PER_BUS, out_channels: 16, kernel: 2 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: conv_out, outputs: 32 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 32, outputs: 1 },
                LayerSpec::Sigmoid,
            ])
        }
    }
}

/// Input layout for a kind (GNN layout is specific to an aggregation node).
pub fn layout_for(kind: NnKind, base: &Network, gnn_node: usize) -> Result<InputLayout> {
    let n = base.n_buses();
    Ok(match kind {
        NnKind::Mlp => InputLayout::Flat { n_buses: n },
        NnKind::Cnn => InputLayout::BusChannels { n_buses: n },
        NnKind::Gnn => InputLayout::Aggregated {
            n_buses: n,
            shift: graph_shift_operator(base, ShiftKind::AdmittanceWeighted)?,
            node: gnn_node,
            n_max: GNN_N_MAX,
        },
    })
}

/// Buses tied for the maximum in-service degree, ascending id.
pub fn max_degree_buses(net: &Network) -> Vec<usize> {
    let n = net.n_buses();
    let mut deg = vec![0usize; n];
    for line in net.lines.iter().filter(|l| l.in_service) {
        deg[line.from_bus] += 1;
        deg[line.to_bus] += 1;
    }
    let best = deg.iter().copied().max().unwrap_or(0);
    (0..n).filter(|&b| deg[b] == best).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct NnTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NnTrainConfig {
    fn default() -> Self {
        NnTrainConfig { epochs: 100, lr: 1e-3, batch_size: 16, seed: 0 }
    }
}

pub struct NnTrainOutcome {
    pub net: FeedForward,
    pub layout: InputLayout,
    pub stats: InputStats,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch whose parameters were kept (best validation loss).
    pub best_epoch: usize,
}

struct FittedCandidate {
    net: FeedForward,
    layout: InputLayout,
    stats: InputStats,
    train_loss: Vec<f64>,
    val_loss: Vec<f64>,
    best_epoch: usize,
    best_val: f64,
}

fn encode_all(layout: &InputLayout, stats: Option<&InputStats>, ds: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    (0..ds.n_rows())
        .map(|r| {
            let mut e = layout.encode(ds.row(r))?;
            if let Some(s) = stats {
                s.apply(&mut e);
            }
            Ok(e)
        })
        .collect()
}

fn batch_tensor(layout: &InputLayout, encoded: &[Vec<f64>], rows: &[usize]) -> Tensor {
    let mut shape = vec![rows.len()];
    shape.extend(layout.sample_shape());
    let mut data = Vec::with_capacity(shape.iter().product());
    for &r in rows {
        data.extend_from_slice(&encoded[r]);
    }
    Tensor::new(shape, data)
}

fn eval_loss(net: &FeedForward, layout: &InputLayout, encoded: &[Vec<f64>], ds: &LabeledDataset, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(f64::NAN);
    }
    let x = batch_tensor(layout, encoded, rows);
    let cache = net.forward(&x)?;
    let y: Vec<f64> = rows.iter().map(|&r| f64::from(ds.labels[r])).collect();
    Ok(bce_loss(&cache.output().data, &y).0)
}

fn fit_one(
    kind: NnKind,
    layout: InputLayout,
    ds: &LabeledDataset,
    cfg: &NnTrainConfig,
    init_stream: u64,
) -> Result<FittedCandidate> {
    let train_rows_base = ds.rows_with_tag(SplitTag::Train);
    let val_rows = ds.rows_with_tag(SplitTag::Val);
    if train_rows_base.is_empty() {
        return Err(Error::InvalidInput("no train rows tagged".into()));
    }
    let raw = encode_all(&layout, None, ds)?;
    let stats = InputStats::fit(&raw, &train_rows_base);
    let encoded: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|mut e| {
            stats.apply(&mut e);
            e
        })
        .collect();

    let specs = arch_specs(kind, ds.n_buses)?;
    let mut net = FeedForward::init(specs, &mut substream(cfg.seed, "nn-init", init_stream));
    let mut adam = AdamState::new(&net.params, cfg.lr);
    let mut shuffle_rng = substream(cfg.seed, "nn-shuffle", init_stream);

    let mut train_rows = train_rows_base;
    let mut train_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<LayerParams>, usize)> = None;

    for epoch in 0..cfg.epochs {
        train_rows.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in train_rows.chunks(cfg.batch_size) {
            let x = batch_tensor(&layout, &encoded, chunk);
            let cache = net.forward(&x)?;
            let y: Vec<f64> = chunk.iter().map(|&r| f64::from(ds.labels[r])).collect();
            let (loss, grad) = bce_loss(&cache.output().data, &y);
            if !loss.is_finite() {
                return Err(Error::TrainDiverged { epoch });
            }
            epoch_loss += loss;
            n_batches += 1;
            let upstream = Tensor::new(cache.output().shape.clone(), grad);
            let (grads, _) = net.backward(&cache, &upstream)?;
            adam_step(&mut adam, &mut net.params, &grads);
        }
        train_curve.push(epoch_loss / n_batches.max(1) as f64);

        let vl = eval_loss(&net, &layout, &encoded, ds, &val_rows)?;
        val_curve.push(vl);
        let candidate = if vl.is_nan() { *train_curve.last().unwrap() } else { vl };
        if best.as_ref().map_or(true, |(b, _, _)| candidate < *b) {
            best = Some((candidate, net.params.clone(), epoch));
        }
    }

    let (best_val, params, best_epoch) = best.expect("at least one epoch");
    net.params = params;
    Ok(FittedCandidate {
        net,
        layout,
        stats,
        train_loss: train_curve,
        val_loss: val_curve,
        best_epoch,
        best_val,
    })
}

/// Train a neural classifier with per-epoch shuffled minibatches, keeping
/// the parameters with the best validation loss. For the GNN, degree ties
/// for the aggregation node are broken by validation loss. A non-finite
/// loss aborts with the offending epoch.
pub fn train_nn(
    kind: NnKind,
    base: &Network,
    ds: &LabeledDataset,
    cfg: &NnTrainConfig,
) -> Result<NnTrainOutcome> {
    let candidates: Vec<InputLayout> = match kind {
        NnKind::Gnn => max_degree_buses(base)
            .into_iter()
            .map(|node| layout_for(kind, base, node))
            .collect::<Result<Vec<_>>>()?,
        _ => vec![layout_for(kind, base, 0)?],
    };
    let mut best: Option<FittedCandidate> = None;
    for (i, layout) in candidates.into_iter().enumerate() {
        let fitted = fit_one(kind, layout, ds, cfg, (kind as u64) * 101 + i as u64)?;
        if best.as_ref().map_or(true, |b| fitted.best_val < b.best_val) {
            best = Some(fitted);
        }
    }
    let b = best.expect("at least one candidate");
    Ok(NnTrainOutcome {
        net: b.net,
        layout: b.layout,
        stats: b.stats,
        train_loss: b.train_loss,
        val_loss: b.val_loss,
        best_epoch: b.best_epoch,
    })
}
