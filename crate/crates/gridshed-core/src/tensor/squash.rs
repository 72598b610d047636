//! Squashed-Gaussian (tanh) reparameterized sampling with log-probabilities
//! and their analytic gradients for fixed noise.

/// Guard inside the tanh Jacobian log term.
const JACOBIAN_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug)]
pub struct SquashSample {
    /// Squashed action in (−1, 1)^n.
    pub action: Vec<f64>,
    /// Pre-squash Gaussian sample u = mean + ε·exp(log_std).
    pub pre_tanh: Vec<f64>,
    /// Joint log-density of `action`, including the tanh Jacobian correction.
    pub log_prob: f64,
}

/// a = tanh(mean + ε σ); log π(a) = Σ log N(u; mean, σ) − Σ log(1 − a² + 1e-6).
pub fn gaussian_tanh_sample(mean: &[f64], log_std: &[f64], noise: &[f64]) -> SquashSample {
    let n = mean.len();
    assert_eq!(log_std.len(), n);
    assert_eq!(noise.len(), n);
    let mut action = Vec::with_capacity(n);
    let mut pre_tanh = Vec::with_capacity(n);
    let mut log_prob = 0.0;
    for i in 0..n {
        let sigma = log_std[i].exp();
        let u = mean[i] + noise[i] * sigma;
        let a = u.tanh();
        log_prob += -HALF_LN_2PI - log_std[i] - 0.5 * noise[i] * noise[i];
        log_prob -= (1.0 - a * a + JACOBIAN_EPS).ln();
        action.push(a);
        pre_tanh.push(u);
    }
    SquashSample { action, pre_tanh, log_prob }
}

/// Log-density of the squashed distribution at an arbitrary action, used by
/// quadrature checks: u = atanh(a).
pub fn squashed_log_density(mean: f64, log_std: f64, action: f64) -> f64 {
    let u = action.atanh();
    let sigma = log_std.exp();
    let z = (u - mean) / sigma;
    -HALF_LN_2PI - log_std - 0.5 * z * z - (1.0 - action * action + JACOBIAN_EPS).ln()
}

#[derive(Clone, Debug)]
pub struct SquashGrads {
    /// ∂ log π / ∂ mean_i (fixed noise).
    pub dlogp_dmean: Vec<f64>,
    /// ∂ log π / ∂ log_std_i (fixed noise).
    pub dlogp_dlogstd: Vec<f64>,
    /// ∂ a_i / ∂ mean_i.
    pub da_dmean: Vec<f64>,
    /// ∂ a_i / ∂ log_std_i.
    pub da_dlogstd: Vec<f64>,
}

/// Analytic derivatives of the reparameterized sample and its log-prob with
/// respect to the distribution parameters, holding the noise fixed.
pub fn gaussian_tanh_grads(log_std: &[f64], noise: &[f64], sample: &SquashSample) -> SquashGrads {
    let n = log_std.len();
    let mut g = SquashGrads {
        dlogp_dmean: Vec::with_capacity(n),
        dlogp_dlogstd: Vec::with_capacity(n),
        da_dmean: Vec::with_capacity(n),
        da_dlogstd: Vec::with_capacity(n),
    };
    for i in 0..n {
        let a = sample.action[i];
        let sigma = log_std[i].exp();
        let sech2 = 1.0 - a * a; // d tanh(u)/du
        let du_dlogstd = noise[i] * sigma;
        // d/du of −ln(1 − a² + ε) = 2 a sech² / (1 − a² + ε)
        let dlogp_du = 2.0 * a * sech2 / (1.0 - a * a + JACOBIAN_EPS);
        g.da_dmean.push(sech2);
        g.da_dlogstd.push(sech2 * du_dlogstd);
        g.dlogp_dmean.push(dlogp_du);
        g.dlogp_dlogstd.push(-1.0 + dlogp_du * du_dlogstd);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mode_log_prob_is_gaussian_peak_plus_zero_jacobian() {
        let s = gaussian_tanh_sample(&[0.0], &[0.5f64.ln()], &[0.0]);
        assert_eq!(s.action[0], 0.0);
        let expect = -HALF_LN_2PI - 0.5f64.ln(); // log(1/(σ√(2π)))
        assert_relative_eq!(s.log_prob, expect - JACOBIAN_EPS.ln_1p(), epsilon = 1e-12);
    }

    #[test]
    fn saturates_toward_one_for_large_means() {
        let s = gaussian_tanh_sample(&[8.0], &[0.0], &[0.0]);
        assert!(s.action[0] > 0.999999 && s.action[0] < 1.0, "a = {}", s.action[0]);
        let deeper = gaussian_tanh_sample(&[30.0], &[0.0], &[0.0]);
        assert!(deeper.action[0] <= 1.0);
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        // Simpson quadrature over a ∈ (−1, 1) for σ = 0.5, mean = 0.3
        let (mean, log_std) = (0.3, 0.5f64.ln());
        let n = 200_001;
        let a0 = -1.0 + 1e-9;
        let a1 = 1.0 - 1e-9;
        let h = (a1 - a0) / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let a = a0 + i as f64 * h;
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            total += w * squashed_log_density(mean, log_std, a).exp();
        }
        total *= h / 3.0;
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::rng::substream(12, "squash-fd", 0);
        use rand::Rng;
        for _ in 0..20 {
            let n = 3;
            let mean: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let log_std: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..0.5)).collect();
            let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = gaussian_tanh_sample(&mean, &log_std, &noise);
            let g = gaussian_tanh_grads(&log_std, &noise, &s);
            let h = 1e-6;
            for i in 0..n {
                let mut mp = mean.clone();
                mp[i] += h;
                let lp = gaussian_tanh_sample(&mp, &log_std, &noise);
                mp[i] -= 2.0 * h;
                let lm = gaussian_tanh_sample(&mp, &log_std, &noise);
                let fd_logp = (lp.log_prob - lm.log_prob) / (2.0 * h);
                let fd_a = (lp.action[i] - lm.action[i]) / (2.0 * h);
                assert_relative_eq!(g.dlogp_dmean[i], fd_logp, max_relative = 1e-4, epsilon = 1e-7);
                assert_relative_eq!(g.da_dmean[i], fd_a, max_relative = 1e-4, epsilon = 1e-7);

                let mut sp = log_std.clone();
                sp[i] += h;
                let lp = gaussian_tanh_sample(&mean, &sp, &noise);
                sp[i] -= 2.0 * h;
                let lm = gaussian_tanh_sample(&mean, &sp, &noise);
                let fd_logp = (lp.log_prob - lm.log_prob) / (2.0 * h);
                let fd_a = (lp.action[i] - lm.action[i]) / (2.0 * h);
                assert_relative_eq!(
                    g.dlogp_dlogstd[i],
                    fd_logp,
                    max_relative = 1e-4,
                    epsilon = 1e-7
                );
                assert_relative_eq!(g.da_dlogstd[i], fd_a, max_relative = 1e-4, epsilon = 1e-7);
            }
        }
    }
}
