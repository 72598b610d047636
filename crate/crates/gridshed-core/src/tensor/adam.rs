//! Bias-corrected Adam.

use super::LayerParams;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub first_moment: Vec<LayerParams>,
    pub second_moment: Vec<LayerParams>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[LayerParams], lr: f64) -> Self {
        let zeros: Vec<LayerParams> = params
            .iter()
            .map(|p| LayerParams {
                weights: vec![0.0; p.weights.len()],
                biases: vec![0.0; p.biases.len()],
            })
            .collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [LayerParams], grads: &[LayerParams]) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let k = AdamConsts {
        lr: state.lr,
        beta1: state.beta1,
        beta2: state.beta2,
        eps: state.eps,
        bc1: 1.0 - state.beta1.powi(t),
        bc2: 1.0 - state.beta2.powi(t),
    };
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        update(&mut p.weights, &g.weights, &mut m.weights, &mut v.weights, &k);
        update(&mut p.biases, &g.biases, &mut m.biases, &mut v.biases, &k);
    }
}

struct AdamConsts {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], k: &AdamConsts) {
    for i in 0..p.len() {
        m[i] = k.beta1 * m[i] + (1.0 - k.beta1) * g[i];
        v[i] = k.beta2 * v[i] + (1.0 - k.beta2) * g[i] * g[i];
        let m_hat = m[i] / k.bc1;
        let v_hat = v[i] / k.bc2;
        p[i] -= k.lr * m_hat / (v_hat.sqrt() + k.eps);
    }
}
