//! Binary cross entropy over probabilities.

const CLAMP: f64 = 1e-12;

/// Mean binary cross entropy and its gradient w.r.t. the probabilities.
/// Probabilities are clamped to [1e-12, 1 − 1e-12] before the logs.
pub fn bce_loss(p: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(p.len(), y.len(), "probability/label length mismatch");
    let m = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p.len()];
    for i in 0..p.len() {
        let pc = p[i].clamp(CLAMP, 1.0 - CLAMP);
        loss -= y[i] * pc.ln() + (1.0 - y[i]) * (1.0 - pc).ln();
        grad[i] = -(y[i] / pc - (1.0 - y[i]) / (1.0 - pc)) / m;
    }
    (loss / m, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coin_flip_costs_ln_two() {
        let (loss, _) = bce_loss(&[0.5], &[1.0]);
        assert_relative_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn perfect_predictions_cost_nothing() {
        let (loss, _) = bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]);
        assert!(loss >= 0.0);
        assert!(loss < 1e-10, "loss {loss}");
    }

    #[test]
    fn loss_is_nonnegative_on_extremes() {
        let (loss, grad) = bce_loss(&[0.0, 1.0], &[1.0, 0.0]);
        assert!(loss > 0.0 && loss.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::rng::substream(8, "bce-fd", 0);
        use rand::Rng;
        for _ in 0..20 {
            let n = 6;
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
            let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2))).collect();
            let (_, grad) = bce_loss(&p, &y);
            for i in 0..n {
                let h = 1e-6;
                let mut pp = p.clone();
                pp[i] += h;
                let (lp, _) = bce_loss(&pp, &y);
                pp[i] -= 2.0 * h;
                let (lm, _) = bce_loss(&pp, &y);
                let fd = (lp - lm) / (2.0 * h);
                let denom = grad[i].abs().max(fd.abs()).max(1e-8);
                assert!(
                    ((grad[i] - fd) / denom).abs() < 1e-6,
                    "grad {} vs fd {}",
                    grad[i],
                    fd
                );
            }
        }
    }
}
