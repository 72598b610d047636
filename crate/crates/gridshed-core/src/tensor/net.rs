//! Feed-forward evaluation with cached activations and reverse-mode gradients.

use crate::error::{Error, Result};

use super::{LayerParams, LayerSpec, Tensor};

/// A fixed layer stack with its parameters.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<LayerParams>,
}

/// Per-layer activations recorded during a forward pass.
pub struct Cache {
    /// inputs[k] is the input to layer k; inputs[n] is the network output.
    inputs: Vec<Tensor>,
    /// argmax offsets per max-pool layer (indexed by layer).
    pool_argmax: Vec<Option<Vec<usize>>>,
}

impl Cache {
    pub fn output(&self) -> &Tensor {
        self.inputs.last().expect("non-empty cache")
    }
}

impl FeedForward {
    pub fn new(specs: Vec<LayerSpec>, params: Vec<LayerParams>) -> Self {
        assert_eq!(specs.len(), params.len(), "one params entry per layer");
        FeedForward { specs, params }
    }

    pub fn init(specs: Vec<LayerSpec>, rng: &mut impl rand::Rng) -> Self {
        let params = super::init_params(&specs, rng);
        FeedForward { specs, params }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, mut shape: Vec<usize>) -> Result<Vec<usize>> {
        for spec in &self.specs {
            shape = spec.output_shape(&shape)?;
        }
        Ok(shape)
    }

    /// Deterministic batched evaluation; returns the output and the cache
    /// needed for [`FeedForward::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<Cache> {
        let mut inputs = Vec::with_capacity(self.specs.len() + 1);
        let mut pool_argmax = vec![None; self.specs.len()];
        inputs.push(input.clone());
        for (k, (spec, params)) in self.specs.iter().zip(&self.params).enumerate() {
            let x = inputs.last().unwrap();
            let sample_shape = &x.shape[1..];
            let out_shape = spec.output_shape(sample_shape)?;
            let batch = x.batch();
            let mut full_shape = vec![batch];
            full_shape.extend_from_slice(&out_shape);
            let mut y = Tensor::zeros(full_shape);
            match *spec {
                LayerSpec::Dense { inputs: ni, outputs: no } => {
                    dense_forward(&x.data, &params.weights, &params.biases, batch, ni, no, &mut y.data);
                }
                LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                    let l = sample_shape[1];
                    conv1d_forward(
                        &x.data,
                        &params.weights,
                        &params.biases,
                        batch,
                        in_channels,
                        out_channels,
                        kernel,
                        l,
                        &mut y.data,
                    );
                }
                LayerSpec::MaxPool1d { width } => {
                    let c = sample_shape[0];
                    let l = sample_shape[1];
                    let mut argmax = vec![0usize; y.len()];
                    maxpool_forward(&x.data, batch, c, l, width, &mut y.data, &mut argmax);
                    pool_argmax[k] = Some(argmax);
                }
                LayerSpec::Relu => {
                    for (o, v) in y.data.iter_mut().zip(&x.data) {
                        *o = v.max(0.0);
                    }
                }
                LayerSpec::Sigmoid => {
                    for (o, v) in y.data.iter_mut().zip(&x.data) {
                        *o = 1.0 / (1.0 + (-v).exp());
                    }
                }
                LayerSpec::Tanh => {
                    for (o, v) in y.data.iter_mut().zip(&x.data) {
                        *o = v.tanh();
                    }
                }
            }
            inputs.push(y);
        }
        Ok(Cache { inputs, pool_argmax })
    }

    /// Backpropagate `upstream` (gradient w.r.t. the output) through the
    /// cached forward pass. Returns per-layer parameter gradients and the
    /// gradient w.r.t. the network input.
    pub fn backward(&self, cache: &Cache, upstream: &Tensor) -> Result<(Vec<LayerParams>, Tensor)> {
        let out = cache.output();
        if upstream.shape != out.shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", out.shape),
                found: format!("{:?}", upstream.shape),
            });
        }
        let mut grads: Vec<LayerParams> =
            self.specs.iter().map(LayerParams::zeros_like).collect();
        let mut g = upstream.clone();
        for (k, (spec, params)) in self.specs.iter().zip(&self.params).enumerate().rev() {
            let x = &cache.inputs[k];
            let y = &cache.inputs[k + 1];
            let batch = x.batch();
            let mut gx = Tensor::zeros(x.shape.clone());
            let gk = &mut grads[k];
            match *spec {
                LayerSpec::Dense { inputs: ni, outputs: no } => {
                    dense_backward(
                        &x.data,
                        &params.weights,
                        &g.data,
                        batch,
                        ni,
                        no,
                        &mut gk.weights,
                        &mut gk.biases,
                        &mut gx.data,
                    );
                }
                LayerSpec::Conv1d { in_channels, out_channels, kernel } => {
                    let l = x.shape[2];
                    conv1d_backward(
                        &x.data,
                        &params.weights,
                        &g.data,
                        batch,
                        in_channels,
                        out_channels,
                        kernel,
                        l,
                        &mut gk.weights,
                        &mut gk.biases,
                        &mut gx.data,
                    );
                }
                LayerSpec::MaxPool1d { .. } => {
                    let argmax = cache.pool_argmax[k].as_ref().expect("pool cache");
                    for (o, &src) in g.data.iter().zip(argmax) {
                        gx.data[src] += o;
                    }
                }
                LayerSpec::Relu => {
                    for i in 0..g.data.len() {
                        gx.data[i] = if y.data[i] > 0.0 { g.data[i] } else { 0.0 };
                    }
                }
                LayerSpec::Sigmoid => {
                    for i in 0..g.data.len() {
                        gx.data[i] = g.data[i] * y.data[i] * (1.0 - y.data[i]);
                    }
                }
                LayerSpec::Tanh => {
                    for i in 0..g.data.len() {
                        gx.data[i] = g.data[i] * (1.0 - y.data[i] * y.data[i]);
                    }
                }
            }
            g = gx;
        }
        Ok((grads, g))
    }
}

fn dense_forward(x: &[f64], w: &[f64], b: &[f64], batch: usize, ni: usize, no: usize, out: &mut [f64]) {
    for bi in 0..batch {
        let row = &mut out[bi * no..(bi + 1) * no];
        row.copy_from_slice(b);
        let xr = &x[bi * ni..(bi + 1) * ni];
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[k * no..(k + 1) * no];
            for (o, wv) in row.iter_mut().zip(wr) {
                *o += xv * wv;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    batch: usize,
    ni: usize,
    no: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    gx: &mut [f64],
) {
    for bi in 0..batch {
        let gr = &g[bi * no..(bi + 1) * no];
        let xr = &x[bi * ni..(bi + 1) * ni];
        for (j, gv) in gr.iter().enumerate() {
            gb[j] += gv;
        }
        for (k, &xv) in xr.iter().enumerate() {
            let wr = &w[k * no..(k + 1) * no];
            let gwr = &mut gw[k * no..(k + 1) * no];
            let mut acc = 0.0;
            for j in 0..no {
                gwr[j] += xv * gr[j];
                acc += gr[j] * wr[j];
            }
            gx[bi * ni + k] = acc;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv1d_forward(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    batch: usize,
    ic: usize,
    oc: usize,
    kernel: usize,
    l: usize,
    out: &mut [f64],
) {
    let lo = l - kernel + 1;
    for bi in 0..batch {
        for o in 0..oc {
            let orow = &mut out[(bi * oc + o) * lo..(bi * oc + o + 1) * lo];
            orow.fill(b[o]);
            for c in 0..ic {
                let xrow = &x[(bi * ic + c) * l..(bi * ic + c + 1) * l];
                let wrow = &w[(o * ic + c) * kernel..(o * ic + c + 1) * kernel];
                for (pos, ov) in orow.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (k, wv) in wrow.iter().enumerate() {
                        acc += wv * xrow[pos + k];
                    }
                    *ov += acc;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    batch: usize,
    ic: usize,
    oc: usize,
    kernel: usize,
    l: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    gx: &mut [f64],
) {
    let lo = l - kernel + 1;
    for bi in 0..batch {
        for o in 0..oc {
            let grow = &g[(bi * oc + o) * lo..(bi * oc + o + 1) * lo];
            gb[o] += grow.iter().sum::<f64>();
            for c in 0..ic {
                let xrow = &x[(bi * ic + c) * l..(bi * ic + c + 1) * l];
                let wrow = &w[(o * ic + c) * kernel..(o * ic + c + 1) * kernel];
                let gwrow = &mut gw[(o * ic + c) * kernel..(o * ic + c + 1) * kernel];
                let gxrow = &mut gx[(bi * ic + c) * l..(bi * ic + c + 1) * l];
                for (pos, gv) in grow.iter().enumerate() {
                    for k in 0..kernel {
                        gwrow[k] += gv * xrow[pos + k];
                        gxrow[pos + k] += gv * wrow[k];
                    }
                }
            }
        }
    }
}

fn maxpool_forward(
    x: &[f64],
    batch: usize,
    c: usize,
    l: usize,
    width: usize,
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let lo = l / width;
    for bc in 0..batch * c {
        let xrow = &x[bc * l..(bc + 1) * l];
        for pos in 0..lo {
            let start = pos * width;
            let mut best = start;
            for k in start + 1..start + width {
                if xrow[k] > xrow[best] {
                    best = k;
                }
            }
            out[bc * lo + pos] = xrow[best];
            argmax[bc * lo + pos] = bc * l + best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_dense_layer_maps_everything_to_zero() {
        let net = FeedForward::new(
            vec![LayerSpec::Dense { inputs: 3, outputs: 2 }],
            vec![LayerParams { weights: vec![0.0; 6], biases: vec![0.0; 2] }],
        );
        let cache = net.forward(&Tensor::new(vec![1, 3], vec![1.0, -2.0, 0.5])).unwrap();
        assert_eq!(cache.output().data, vec![0.0, 0.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let net = FeedForward::new(vec![LayerSpec::Relu], vec![LayerParams::default()]);
        let cache = net.forward(&Tensor::new(vec![1, 2], vec![-1.0, 2.0])).unwrap();
        assert_eq!(cache.output().data, vec![0.0, 2.0]);
    }

    #[test]
    fn conv1d_hand_example() {
        // kernel [1, 1] over [1, 2, 3] -> [3, 5]
        let net = FeedForward::new(
            vec![LayerSpec::Conv1d { in_channels: 1, out_channels: 1, kernel: 2 }],
            vec![LayerParams { weights: vec![1.0, 1.0], biases: vec![0.0] }],
        );
        let cache = net.forward(&Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(cache.output().data, vec![3.0, 5.0]);
    }

    #[test]
    fn identity_activation_stack_passes_gradient_through() {
        let net = FeedForward::new(vec![LayerSpec::Relu], vec![LayerParams::default()]);
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]);
        let cache = net.forward(&x).unwrap();
        let upstream = Tensor::new(vec![1, 3], vec![0.1, 0.2, 0.3]);
        let (_, gx) = net.backward(&cache, &upstream).unwrap();
        assert_eq!(gx.data, upstream.data);
    }

    #[test]
    fn scalar_dense_product_rule() {
        // y = w x, upstream 1 → dL/dw = x
        let net = FeedForward::new(
            vec![LayerSpec::Dense { inputs: 1, outputs: 1 }],
            vec![LayerParams { weights: vec![2.5], biases: vec![0.0] }],
        );
        let x = Tensor::new(vec![1, 1], vec![3.0]);
        let cache = net.forward(&x).unwrap();
        let (grads, gx) = net.backward(&cache, &Tensor::new(vec![1, 1], vec![1.0])).unwrap();
        assert_relative_eq!(grads[0].weights[0], 3.0);
        assert_relative_eq!(gx.data[0], 2.5);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = FeedForward::new(
            vec![LayerSpec::Dense { inputs: 4, outputs: 2 }],
            vec![LayerParams { weights: vec![0.0; 8], biases: vec![0.0; 2] }],
        );
        assert!(net.forward(&Tensor::new(vec![1, 3], vec![0.0; 3])).is_err());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = crate::rng::substream(1, "det", 0);
        let specs = vec![
            LayerSpec::Dense { inputs: 5, outputs: 4 },
            LayerSpec::Tanh,
            LayerSpec::Dense { inputs: 4, outputs: 1 },
            LayerSpec::Sigmoid,
        ];
        let net = FeedForward::init(specs, &mut rng);
        let x = Tensor::new(vec![2, 5], (0..10).map(|i| i as f64 * 0.1).collect());
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a.output().data, b.output().data);
    }
}
