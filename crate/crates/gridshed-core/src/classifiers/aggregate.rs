//! Aggregation sequences for the GNN: successive shift-operator powers of
//! each graph signal, observed at a single node.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row k, column f of the result is [S^k x^f]_i for k = 0..n_max−1.
/// `signals` is bus-major with `n_features` columns per bus.
pub fn aggregate_signal(
    shift: &DMatrix<f64>,
    signals: &[f64],
    n_features: usize,
    node: usize,
    n_max: usize,
) -> Result<Vec<f64>> {
    let n = shift.nrows();
    if shift.ncols() != n {
        return Err(Error::InvalidInput("shift operator must be square".into()));
    }
    if node >= n {
        return Err(Error::InvalidInput(format!("aggregation node {node} out of range")));
    }
    if signals.len() != n * n_features {
        return Err(Error::ShapeMismatch {
            expected: format!("{} signal values", n * n_features),
            found: format!("{}", signals.len()),
        });
    }
    let mut out = vec![0.0; n_max * n_features];
    for f in 0..n_features {
        let mut x = DVector::from_fn(n, |b, _| signals[b * n_features + f]);
        for k in 0..n_max {
            out[k * n_features + f] = x[node];
            if k + 1 < n_max {
                x = shift * x;
            }
        }
    }
    Ok(out)
}
