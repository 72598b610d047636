//! Graph shift operators over the grid topology.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::grid::admittance::build_admittance;
use crate::grid::network::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// 0/1 adjacency over in-service lines.
    Adjacency,
    /// |Y_ij| edge weights, normalized by the largest-magnitude eigenvalue.
    AdmittanceWeighted,
}

/// Real symmetric N×N shift operator; zero wherever no in-service line
/// connects the bus pair, zero diagonal.
pub fn graph_shift_operator(net: &Network, kind: ShiftKind) -> Result<DMatrix<f64>> {
    let n = net.n_buses();
    let mut s = DMatrix::<f64>::zeros(n, n);
    match kind {
        ShiftKind::Adjacency => {
            for line in net.lines.iter().filter(|l| l.in_service) {
                s[(line.from_bus, line.to_bus)] = 1.0;
                s[(line.to_bus, line.from_bus)] = 1.0;
            }
        }
        ShiftKind::AdmittanceWeighted => {
            let y = build_admittance(net)?;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s[(i, j)] = y[(i, j)].norm();
                    }
                }
            }
            let eig = s.clone().symmetric_eigen();
            let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            if lambda_max > 0.0 {
                s /= lambda_max;
            }
        }
    }
    Ok(s)
}

/// Bus with the most incident in-service lines; ties go to the lowest id.
pub fn highest_degree_bus(net: &Network) -> usize {
    let n = net.n_buses();
    let mut deg = vec![0usize; n];
    for line in net.lines.iter().filter(|l| l.in_service) {
        deg[line.from_bus] += 1;
        deg[line.to_bus] += 1;
    }
    (0..n).max_by_key(|&i| (deg[i], std::cmp::Reverse(i))).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::network::{Bus, BusKind, Generator, Line};
    use approx::assert_relative_eq;

    fn path3(x: f64) -> Network {
        Network {
            base_mva: 100.0,
            f_nominal: 60.0,
            buses: (0..3)
                .map(|i| Bus {
                    id: i,
                    kind: if i == 0 { BusKind::Slack } else { BusKind::LoadOnly },
                    voltage_mag: 1.0,
                    voltage_ang: 0.0,
                    p_net: 0.0,
                    q_net: 0.0,
                })
                .collect(),
            lines: vec![
                Line { from_bus: 0, to_bus: 1, resistance: 0.0, reactance: x, shunt_susceptance: 0.0, in_service: true },
                Line { from_bus: 1, to_bus: 2, resistance: 0.0, reactance: x, shunt_susceptance: 0.0, in_service: true },
            ],
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
    fn path_graph_adjacency() {
        let s = graph_shift_operator(&path3(0.1), ShiftKind::Adjacency).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        assert_eq!(s, expect);
    }

    #[test]
    fn non_adjacent_entry_is_zero_for_both_kinds() {
        for kind in [ShiftKind::Adjacency, ShiftKind::AdmittanceWeighted] {
            let s = graph_shift_operator(&path3(0.1), kind).unwrap();
            assert_eq!(s[(0, 2)], 0.0);
            assert_eq!(s[(2, 0)], 0.0);
        }
    }

    #[test]
    fn identical_lines_reduce_to_scaled_adjacency() {
        // all |Y_ij| equal, so the normalized operator is adjacency / λ_max(A);
        // for the 3-path λ_max = √2
        let s = graph_shift_operator(&path3(0.1), ShiftKind::AdmittanceWeighted).unwrap();
        let a = graph_shift_operator(&path3(0.1), ShiftKind::Adjacency).unwrap();
        let scale = 1.0 / 2.0f64.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(s[(i, j)], a[(i, j)] * scale, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn largest_eigenvalue_is_one_after_normalization() {
        let mut net = path3(0.1);
        net.lines[1].reactance = 0.4;
        let s = graph_shift_operator(&net, ShiftKind::AdmittanceWeighted).unwrap();
        let eig = s.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert_relative_eq!(lmax, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn highest_degree_bus_breaks_ties_low() {
        // path graph: bus 1 has degree 2
        assert_eq!(highest_degree_bus(&path3(0.1)), 1);
    }
}
