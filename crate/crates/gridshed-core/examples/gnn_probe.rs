//! Diagnose the GNN: is the aggregation representation sufficient, and does
//! input scaling fix training? Trains (a) an MLP on aggregated features,
//! (b) the conv GNN on raw aggregations, (c) the conv GNN on standardized
//! aggregations. Usage: gnn_probe [m]

use gridshed_core::classifiers::{aggregate_signal, GNN_N_MAX};
use gridshed_core::dynamics::{load_contingencies, FsaThresholds, SimParams};
use gridshed_core::grid::{graph_shift_operator, highest_degree_bus, Network, ShiftKind};
use gridshed_core::rng::substream;
use gridshed_core::scenario::{generate_dataset, split_dataset, SplitTag};
use gridshed_core::tensor::{adam_step, bce_loss, AdamState, FeedForward, LayerSpec, Tensor};
use rand::seq::SliceRandom;

fn train_and_eval(
    name: &str,
    specs: Vec<LayerSpec>,
    shape: Vec<usize>,
    encoded: &[Vec<f64>],
    labels: &[u8],
    tags: &[SplitTag],
) {
    let mut net = FeedForward::init(specs, &mut substream(1, "probe-init", 0));
    let mut adam = AdamState::new(&net.params, 1e-3);
    let mut train_rows: Vec<usize> =
        (0..labels.len()).filter(|&r| tags[r] == SplitTag::Train).collect();
    let test_rows: Vec<usize> =
        (0..labels.len()).filter(|&r| tags[r] == SplitTag::Test).collect();
    let mut rng = substream(1, "probe-shuffle", 0);
    for _epoch in 0..100 {
        train_rows.shuffle(&mut rng);
        for chunk in train_rows.chunks(16) {
            let mut full = vec![chunk.len()];
            full.extend_from_slice(&shape);
            let data: Vec<f64> = chunk.iter().flat_map(|&r| encoded[r].clone()).collect();
            let x = Tensor::new(full, data);
            let cache = net.forward(&x).unwrap();
            let y: Vec<f64> = chunk.iter().map(|&r| f64::from(labels[r])).collect();
            let (_, grad) = bce_loss(&cache.output().data, &y);
            let up = Tensor::new(cache.output().shape.clone(), grad);
            let (grads, _) = net.backward(&cache, &up).unwrap();
            adam_step(&mut adam, &mut net.params, &grads);
        }
    }
    let mut correct = 0;
    for &r in &test_rows {
        let mut full = vec![1];
        full.extend_from_slice(&shape);
        let x = Tensor::new(full, encoded[r].clone());
        let p = net.forward(&x).unwrap().output().data[0];
        if u8::from(p >= 0.5) == labels[r] {
            correct += 1;
        }
    }
    println!("{name:<28} test acc {:.2}%", 100.0 * correct as f64 / test_rows.len() as f64);
}

fn main() {
    let m: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    let base = Network::from_file(dir.join("case9.json")).unwrap();
    let contingencies = load_contingencies(dir.join("contingencies_9bus.json")).unwrap();
    let mut ds = generate_dataset(
        &base,
        &contingencies,
        m,
        77,
        FsaThresholds::default(),
        SimParams::default(),
    )
    .unwrap();
    split_dataset(&mut ds, (0.75, 0.15, 0.10), 77);

    let shift = graph_shift_operator(&base, ShiftKind::AdmittanceWeighted).unwrap();
    let node = highest_degree_bus(&base);
    println!("aggregation node: {node}");

    // aggregated rows, channel-major (4, N_max)
    let agg: Vec<Vec<f64>> = (0..ds.n_rows())
        .map(|r| {
            let z = aggregate_signal(&shift, ds.row(r), 4, node, GNN_N_MAX).unwrap();
            let mut out = vec![0.0; z.len()];
            for k in 0..GNN_N_MAX {
                for f in 0..4 {
                    out[f * GNN_N_MAX + k] = z[k * 4 + f];
                }
            }
            out
        })
        .collect();

    for r in 0..3 {
        println!("agg row {r}: {:?}", agg[r].iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    }

    // column standardization over train rows
    let train_rows: Vec<usize> =
        (0..ds.n_rows()).filter(|&r| ds.tags[r] == SplitTag::Train).collect();
    let w = agg[0].len();
    let mut mean = vec![0.0; w];
    let mut std = vec![0.0; w];
    for &r in &train_rows {
        for c in 0..w {
            mean[c] += agg[r][c];
        }
    }
    for v in &mut mean {
        *v /= train_rows.len() as f64;
    }
    for &r in &train_rows {
        for c in 0..w {
            std[c] += (agg[r][c] - mean[c]).powi(2);
        }
    }
    for v in &mut std {
        *v = (*v / train_rows.len() as f64).sqrt().max(1e-9);
    }
    let agg_std: Vec<Vec<f64>> = agg
        .iter()
        .map(|row| row.iter().enumerate().map(|(c, v)| (v - mean[c]) / std[c]).collect())
        .collect();

    let gnn_specs = || {
        vec![
            LayerSpec::Conv1d { in_channels: 4, out_channels: 16, kernel: 2 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 32, outputs: 32 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 32, outputs: 1 },
            LayerSpec::Sigmoid,
        ]
    };
    let mlp_specs = vec![
        LayerSpec::Dense { inputs: 12, outputs: 64 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 64, outputs: 32 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 32, outputs: 1 },
        LayerSpec::Sigmoid,
    ];

    let _ = (mlp_specs, agg_std);
    for kind in [ShiftKind::AdmittanceWeighted, ShiftKind::Adjacency] {
        let s_mat = graph_shift_operator(&base, kind).unwrap();
        for node in 0..base.n_buses() {
            let agg: Vec<Vec<f64>> = (0..ds.n_rows())
                .map(|r| {
                    let z = aggregate_signal(&s_mat, ds.row(r), 4, node, GNN_N_MAX).unwrap();
                    let mut out = vec![0.0; z.len()];
                    for k in 0..GNN_N_MAX {
                        for f in 0..4 {
                            out[f * GNN_N_MAX + k] = z[k * 4 + f];
                        }
                    }
                    out
                })
                .collect();
            let w = agg[0].len();
            let mut mean = vec![0.0; w];
            let mut std = vec![0.0; w];
            for &r in &train_rows {
                for c in 0..w {
                    mean[c] += agg[r][c];
                }
            }
            for v in &mut mean {
                *v /= train_rows.len() as f64;
            }
            for &r in &train_rows {
                for c in 0..w {
                    std[c] += (agg[r][c] - mean[c]).powi(2);
                }
            }
            for v in &mut std {
                *v = (*v / train_rows.len() as f64).sqrt().max(1e-9);
            }
            let enc: Vec<Vec<f64>> = agg
                .iter()
                .map(|row| row.iter().enumerate().map(|(c, v)| (v - mean[c]) / std[c]).collect())
                .collect();
            train_and_eval(
                &format!("{kind:?} node {node}"),
                gnn_specs(),
                vec![4, 3],
                &enc,
                &ds.labels,
                &ds.tags,
            );
        }
    }
}
