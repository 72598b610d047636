//! Bus admittance matrix and Kron reduction.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::network::Network;

/// Build the complex N×N bus admittance matrix over in-service lines.
///
/// Off-diagonal (i,j) is minus the sum of series admittances of lines
/// between i and j; the diagonal collects incident series admittances plus
/// half the charging susceptance of each incident line.
pub fn build_admittance(net: &Network) -> Result<DMatrix<Complex64>> {
    let n = net.n_buses();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for (k, line) in net.lines.iter().enumerate() {
        if !line.in_service {
            continue;
        }
        if line.resistance == 0.0 && line.reactance == 0.0 {
            return Err(Error::ZeroImpedanceBranch { line: k });
        }
        let z = Complex64::new(line.resistance, line.reactance);
        let ys = z.inv();
        let ysh = Complex64::new(0.0, line.shunt_susceptance / 2.0);
        let (a, b) = (line.from_bus, line.to_bus);
        y[(a, a)] += ys + ysh;
        y[(b, b)] += ys + ysh;
        y[(a, b)] -= ys;
        y[(b, a)] -= ys;
    }
    Ok(y)
}

/// Schur-complement elimination of all nodes not in `keep`.
///
/// The reduced matrix reproduces the injections at kept nodes for any
/// kept-node voltage assignment, assuming zero injection at eliminated
/// nodes: `Y_red = Y_kk - Y_ke * Y_ee^{-1} * Y_ek`.
pub fn kron_reduce(y: &DMatrix<Complex64>, keep: &[usize]) -> Result<DMatrix<Complex64>> {
    let n = y.nrows();
    assert_eq!(n, y.ncols(), "admittance matrix must be square");
    let keep_set: std::collections::HashSet<usize> = keep.iter().copied().collect();
    assert_eq!(keep_set.len(), keep.len(), "keep set has duplicates");
    assert!(keep.iter().all(|&i| i < n), "keep index out of range");

    let elim: Vec<usize> = (0..n).filter(|i| !keep_set.contains(i)).collect();
    if elim.is_empty() {
        return Ok(y.clone());
    }

    let y_kk = DMatrix::from_fn(keep.len(), keep.len(), |r, c| y[(keep[r], keep[c])]);
    let y_ke = DMatrix::from_fn(keep.len(), elim.len(), |r, c| y[(keep[r], elim[c])]);
    let y_ek = DMatrix::from_fn(elim.len(), keep.len(), |r, c| y[(elim[r], keep[c])]);
    let y_ee = DMatrix::from_fn(elim.len(), elim.len(), |r, c| y[(elim[r], elim[c])]);

    let lu = y_ee.lu();
    let solved = lu.solve(&y_ek).ok_or(Error::SingularBlock)?;
    Ok(y_kk - y_ke * solved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::network::{Bus, BusKind, Generator, Line};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn line(from: usize, to: usize, r: f64, x: f64) -> Line {
        Line { from_bus: from, to_bus: to, resistance: r, reactance: x, shunt_susceptance: 0.0, in_service: true }
    }

    fn path_network(n: usize, x: f64) -> Network {
        Network {
            base_mva: 100.0,
            f_nominal: 60.0,
            buses: (0..n)
                .map(|i| Bus {
                    id: i,
                    kind: if i == 0 { BusKind::Slack } else { BusKind::LoadOnly },
                    voltage_mag: 1.0,
                    voltage_ang: 0.0,
                    p_net: 0.0,
                    q_net: 0.0,
                })
                .collect(),
            lines: (0..n - 1).map(|i| line(i, i + 1, 0.0, x)).collect(),
            generators: vec![Generator {
                bus: 0,
                inertia_h: 5.0,
                damping_d: 1.0,
                p_mech: 0.0,
                transient_reactance: 0.1,
                internal_voltage: 1.0,
            }],
            loads: vec![],
        }
    }

    #[test]
    fn two_bus_purely_reactive_line() {
        // y = 1/(j0.1) = -10j
        let net = path_network(2, 0.1);
        let y = build_admittance(&net).unwrap();
        let expect = Complex64::new(0.0, -10.0);
        assert_relative_eq!(y[(0, 0)].im, expect.im, epsilon = 1e-12);
        assert_relative_eq!(y[(0, 1)].im, 10.0, epsilon = 1e-12);
        assert_relative_eq!(y[(1, 0)].im, 10.0, epsilon = 1e-12);
        assert_relative_eq!(y[(1, 1)].im, -10.0, epsilon = 1e-12);
        assert_eq!(y[(0, 0)].re, 0.0);
    }

    #[test]
    fn out_of_service_line_leaves_zero_entry() {
        let mut net = path_network(3, 0.1);
        net.lines.push(Line { in_service: false, ..line(0, 2, 0.0, 0.2) });
        let y = build_admittance(&net).unwrap();
        assert_eq!(y[(0, 2)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn non_adjacent_buses_have_zero_entry() {
        let net = path_network(3, 0.1);
        let y = build_admittance(&net).unwrap();
        assert_eq!(y[(0, 2)], Complex64::new(0.0, 0.0));
        assert_eq!(y[(2, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn ybus_is_symmetric() {
        let mut net = path_network(5, 0.07);
        net.lines.push(line(0, 3, 0.01, 0.2));
        net.lines.push(line(1, 4, 0.02, 0.15));
        let y = build_admittance(&net).unwrap();
        assert_eq!(y, y.transpose());
    }

    #[test]
    fn kron_keep_all_is_identity_transformation() {
        let net = path_network(4, 0.1);
        let y = build_admittance(&net).unwrap();
        let red = kron_reduce(&y, &[0, 1, 2, 3]).unwrap();
        assert_eq!(red, y);
    }

    #[test]
    fn kron_chain_eliminates_to_series_combination() {
        // 3-node chain with branch admittances y01, y12; eliminating the middle
        // node leaves the series combination between the ends.
        let mut net = path_network(3, 0.1);
        net.lines[1].reactance = 0.25;
        let y = build_admittance(&net).unwrap();
        let red = kron_reduce(&y, &[0, 2]).unwrap();
        let y01 = Complex64::new(0.0, -10.0);
        let y12 = Complex64::new(0.0, -4.0);
        let series = y01 * y12 / (y01 + y12);
        assert_relative_eq!(red[(0, 1)].im, (-series).im, epsilon = 1e-12);
        assert_relative_eq!(red[(0, 0)].im, series.im, epsilon = 1e-12);
    }

    #[test]
    fn kron_injection_equivalence_on_random_case() {
        // For voltages at kept nodes and zero injection at eliminated nodes,
        // kept-node currents from the reduced and full systems agree.
        let mut rng = crate::rng::substream(42, "kron-test", 0);
        for _ in 0..10 {
            let n = 5;
            let mut y = DMatrix::<Complex64>::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let ys = Complex64::new(rng.gen_range(0.1..2.0), rng.gen_range(-10.0..-0.5));
                    y[(i, j)] = -ys;
                    y[(j, i)] = -ys;
                    y[(i, i)] += ys;
                    y[(j, j)] += ys;
                }
            }
            // shunts keep the eliminated block comfortably nonsingular
            for i in 0..n {
                y[(i, i)] += Complex64::new(rng.gen_range(0.01..0.1), rng.gen_range(-0.1..0.1));
            }
            let keep = [0usize, 2, 4];
            let elim = [1usize, 3];
            let red = kron_reduce(&y, &keep).unwrap();

            let vk = nalgebra::DVector::from_fn(3, |_, _| {
                Complex64::new(rng.gen_range(0.9..1.1), rng.gen_range(-0.2..0.2))
            });
            // full system: solve for eliminated voltages with zero injections
            let y_ee = DMatrix::from_fn(2, 2, |r, c| y[(elim[r], elim[c])]);
            let y_ek = DMatrix::from_fn(2, 3, |r, c| y[(elim[r], keep[c])]);
            let y_ke = DMatrix::from_fn(3, 2, |r, c| y[(keep[r], elim[c])]);
            let y_kk = DMatrix::from_fn(3, 3, |r, c| y[(keep[r], keep[c])]);
            let ve = y_ee.lu().solve(&(-&y_ek * &vk)).unwrap();
            let i_full = &y_kk * &vk + &y_ke * &ve;
            let i_red = &red * &vk;
            for r in 0..3 {
                assert_relative_eq!(i_full[r].re, i_red[r].re, max_relative = 1e-10, epsilon = 1e-12);
                assert_relative_eq!(i_full[r].im, i_red[r].im, max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }
}
