//! Minimal dense/conv1d neural-network kernels with reverse-mode gradients,
//! Adam, and squashed-Gaussian sampling utilities. Everything is f64;
//! gradients are verified against central finite differences in tests.

mod adam;
mod checkpoint;
mod loss;
mod net;
mod squash;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::bce_loss;
pub use net::{Cache, FeedForward};
pub use squash::{gaussian_tanh_grads, gaussian_tanh_sample, squashed_log_density, SquashGrads, SquashSample};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length mismatch");
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension (batch size for network inputs/outputs).
    pub fn batch(&self) -> usize {
        *self.shape.first().unwrap_or(&0)
    }

    /// Elements per batch row.
    pub fn row_size(&self) -> usize {
        self.shape.iter().skip(1).product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    /// Valid (no padding) stride-1 convolution over the last axis.
    Conv1d { in_channels: usize, out_channels: usize, kernel: usize },
    MaxPool1d { width: usize },
    Relu,
    Sigmoid,
    Tanh,
}

impl LayerSpec {
    pub fn n_weights(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs * outputs,
            LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                in_channels * out_channels * kernel
            }
            _ => 0,
        }
    }

    pub fn n_biases(&self) -> usize {
        match *self {
            LayerSpec::Dense { outputs, .. } => outputs,
            LayerSpec::Conv1d { out_channels, .. } => out_channels,
            _ => 0,
        }
    }

    /// Per-sample output shape given the per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: String| Error::ShapeMismatch {
            expected,
            found: format!("{:?}", input),
        };
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                let flat: usize = input.iter().product();
                if flat != inputs {
                    return Err(mismatch(format!("{} inputs", inputs)));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                let [c, l] = input else {
                    return Err(mismatch("(channels, length)".into()));
                };
                if *c != in_channels || *l < kernel {
                    return Err(mismatch(format!("({} channels, length >= {})", in_channels, kernel)));
                }
                Ok(vec![out_channels, l - kernel + 1])
            }
            LayerSpec::MaxPool1d { width } => {
                let [c, l] = input else {
                    return Err(mismatch("(channels, length)".into()));
                };
                if *l < width {
                    return Err(mismatch(format!("length >= {}", width)));
                }
                Ok(vec![*c, l / width])
            }
            LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Tanh => Ok(input.to_vec()),
        }
    }
}

/// Weights and biases of one layer (empty for parameterless layers).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros_like(spec: &LayerSpec) -> Self {
        LayerParams { weights: vec![0.0; spec.n_weights()], biases: vec![0.0; spec.n_biases()] }
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(specs: &[LayerSpec], rng: &mut impl Rng) -> Vec<LayerParams> {
    specs
        .iter()
        .map(|spec| {
            let (fan_in, fan_out) = match *spec {
                LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
                LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                    (in_channels * kernel, out_channels * kernel)
                }
                _ => return LayerParams::default(),
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            LayerParams {
                weights: (0..spec.n_weights()).map(|_| rng.gen_range(-bound..bound)).collect(),
                biases: vec![0.0; spec.n_biases()],
            }
        })
        .collect()
}

/// Flatten parameters in layer order, weights then biases.
pub fn flatten_params(params: &[LayerParams]) -> Vec<f64> {
    let mut out = Vec::new();
    for p in params {
        out.extend_from_slice(&p.weights);
        out.extend_from_slice(&p.biases);
    }
    out
}

/// Inverse of [`flatten_params`] for a given architecture.
pub fn unflatten_params(specs: &[LayerSpec], flat: &[f64]) -> Result<Vec<LayerParams>> {
    let expected: usize = specs.iter().map(|s| s.n_weights() + s.n_biases()).sum();
    if flat.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameters", expected),
            found: format!("{}", flat.len()),
        });
    }
    let mut out = Vec::with_capacity(specs.len());
    let mut at = 0;
    for spec in specs {
        let nw = spec.n_weights();
        let nb = spec.n_biases();
        out.push(LayerParams {
            weights: flat[at..at + nw].to_vec(),
            biases: flat[at + nw..at + nw + nb].to_vec(),
        });
        at += nw + nb;
    }
    Ok(out)
}
