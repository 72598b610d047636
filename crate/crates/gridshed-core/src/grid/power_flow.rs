//! Full Newton-Raphson AC power flow with a flat start.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::admittance::build_admittance;
use crate::grid::network::{BusKind, Network};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20;

#[derive(Clone, Debug)]
pub struct PowerFlowSolution {
    pub voltage_mag: Vec<f64>,
    pub voltage_ang: Vec<f64>,
    /// Net active injection at the solution, pu.
    pub p_net: Vec<f64>,
    /// Net reactive injection at the solution, pu.
    pub q_net: Vec<f64>,
    pub iterations: usize,
}

impl PowerFlowSolution {
    pub fn complex_voltage(&self, bus: usize) -> Complex64 {
        Complex64::from_polar(self.voltage_mag[bus], self.voltage_ang[bus])
    }
}

fn injections(y: &DMatrix<Complex64>, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = vm.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let yij = y[(i, j)];
            if yij == Complex64::new(0.0, 0.0) {
                continue;
            }
            // S_i = V_i conj(Σ_j Y_ij V_j) = V_i Σ_j conj(Y_ij) V_j e^{j(θ_i−θ_j)}
            let ang = va[i] - va[j];
            s += yij.conj() * Complex64::from_polar(vm[j], ang);
        }
        p[i] = vm[i] * s.re;
        q[i] = vm[i] * s.im;
    }
    (p, q)
}

/// Solve the AC power flow by Newton-Raphson.
///
/// Slack: fixed |V| and angle. Generator buses: fixed P and |V|.
/// Load-only buses: fixed P and Q. Scheduled injections come from the
/// generator and load tables. Diverged cases are reported as an error so
/// callers can discard the operating point.
pub fn solve_power_flow(net: &Network, tol: f64, max_iter: usize) -> Result<PowerFlowSolution> {
    let n = net.n_buses();
    let y = build_admittance(net)?;
    let slack = net.slack_bus();

    let p_sched = net.scheduled_p();
    let q_sched = net.scheduled_q();

    // flat start: setpoint magnitudes at slack/PV, 1.0 at PQ, slack angle kept
    let mut vm: Vec<f64> = net
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack | BusKind::Generator => b.voltage_mag,
            BusKind::LoadOnly => 1.0,
        })
        .collect();
    let mut va = vec![net.buses[slack].voltage_ang; n];

    let p_rows: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let q_rows: Vec<usize> = (0..n)
        .filter(|&i| net.buses[i].kind == BusKind::LoadOnly)
        .collect();
    let n_p = p_rows.len();
    let n_q = q_rows.len();
    let dim = n_p + n_q;

    let g = y.map(|c| c.re);
    let b = y.map(|c| c.im);

    let mut last_mismatch = f64::INFINITY;
    for iter in 0..=max_iter {
        let (p, q) = injections(&y, &vm, &va);
        let mut mis = DVector::<f64>::zeros(dim);
        for (r, &i) in p_rows.iter().enumerate() {
            mis[r] = p_sched[i] - p[i];
        }
        for (r, &i) in q_rows.iter().enumerate() {
            mis[n_p + r] = q_sched[i] - q[i];
        }
        last_mismatch = if dim == 0 { 0.0 } else { mis.amax() };
        if last_mismatch < tol {
            return Ok(PowerFlowSolution {
                voltage_mag: vm,
                voltage_ang: va,
                p_net: p,
                q_net: q,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }

        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for (r, &i) in p_rows.iter().enumerate() {
            for (c, &j) in p_rows.iter().enumerate() {
                jac[(r, c)] = if i == j {
                    -q[i] - b[(i, i)] * vm[i] * vm[i]
                } else {
                    let t = va[i] - va[j];
                    vm[i] * vm[j] * (g[(i, j)] * t.sin() - b[(i, j)] * t.cos())
                };
            }
            for (c, &j) in q_rows.iter().enumerate() {
                jac[(r, n_p + c)] = if i == j {
                    p[i] / vm[i] + g[(i, i)] * vm[i]
                } else {
                    let t = va[i] - va[j];
                    vm[i] * (g[(i, j)] * t.cos() + b[(i, j)] * t.sin())
                };
            }
        }
        for (r, &i) in q_rows.iter().enumerate() {
            for (c, &j) in p_rows.iter().enumerate() {
                jac[(n_p + r, c)] = if i == j {
                    p[i] - g[(i, i)] * vm[i] * vm[i]
                } else {
                    let t = va[i] - va[j];
                    -vm[i] * vm[j] * (g[(i, j)] * t.cos() + b[(i, j)] * t.sin())
                };
            }
            for (c, &j) in q_rows.iter().enumerate() {
                jac[(n_p + r, n_p + c)] = if i == j {
                    q[i] / vm[i] - b[(i, i)] * vm[i]
                } else {
                    let t = va[i] - va[j];
                    vm[i] * (g[(i, j)] * t.sin() - b[(i, j)] * t.cos())
                };
            }
        }

        let step = jac
            .lu()
            .solve(&mis)
            .ok_or(Error::PowerFlowDiverged { iterations: iter, mismatch: last_mismatch })?;
        if !step.iter().all(|x| x.is_finite()) {
            return Err(Error::PowerFlowDiverged { iterations: iter, mismatch: last_mismatch });
        }
        for (r, &i) in p_rows.iter().enumerate() {
            va[i] += step[r];
        }
        for (r, &i) in q_rows.iter().enumerate() {
            vm[i] += step[n_p + r];
            if vm[i] <= 0.0 {
                return Err(Error::PowerFlowDiverged { iterations: iter, mismatch: last_mismatch });
            }
        }
    }
    Err(Error::PowerFlowDiverged { iterations: max_iter, mismatch: last_mismatch })
}

/// Max power mismatch of a solution, recomputed independently via the
/// polar form P_i = V_i Σ_j |Y_ij| V_j cos(θ_i − θ_j − φ_ij).
pub fn residual_infnorm(net: &Network, sol: &PowerFlowSolution) -> Result<f64> {
    let y = build_admittance(net)?;
    let n = net.n_buses();
    let slack = net.slack_bus();
    let p_sched = net.scheduled_p();
    let q_sched = net.scheduled_q();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut p = 0.0;
        let mut q = 0.0;
        for j in 0..n {
            let yij = y[(i, j)];
            if yij == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (mag, phi) = yij.to_polar();
            let t = sol.voltage_ang[i] - sol.voltage_ang[j] - phi;
            p += sol.voltage_mag[i] * mag * sol.voltage_mag[j] * t.cos();
            q += sol.voltage_mag[i] * mag * sol.voltage_mag[j] * t.sin();
        }
        if i != slack {
            worst = worst.max((p_sched[i] - p).abs());
        }
        if net.buses[i].kind == BusKind::LoadOnly {
            worst = worst.max((q_sched[i] - q).abs());
        }
        // stored injections must match the recomputation
        worst = worst.max((sol.p_net[i] - p).abs());
        worst = worst.max((sol.q_net[i] - q).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::network::{Bus, Generator, Line, Load};
    use approx::assert_relative_eq;

    fn two_bus(load_p: f64, pv_bus2: bool) -> Network {
        Network {
            base_mva: 100.0,
            f_nominal: 60.0,
            buses: vec![
                Bus { id: 0, kind: BusKind::Slack, voltage_mag: 1.0, voltage_ang: 0.0, p_net: 0.0, q_net: 0.0 },
                Bus {
                    id: 1,
                    kind: if pv_bus2 { BusKind::Generator } else { BusKind::LoadOnly },
                    voltage_mag: 1.0,
                    voltage_ang: 0.0,
                    p_net: 0.0,
                    q_net: 0.0,
                },
            ],
            lines: vec![Line {
                from_bus: 0,
                to_bus: 1,
                resistance: 0.0,
                reactance: 0.1,
                shunt_susceptance: 0.0,
                in_service: true,
            }],
            generators: {
                let mut g = vec![Generator {
                    bus: 0,
                    inertia_h: 5.0,
                    damping_d: 1.0,
                    p_mech: 0.0,
                    transient_reactance: 0.1,
                    internal_voltage: 1.0,
                }];
                if pv_bus2 {
                    g.push(Generator {
                        bus: 1,
                        inertia_h: 5.0,
                        damping_d: 1.0,
                        p_mech: 0.0,
                        transient_reactance: 0.1,
                        internal_voltage: 1.0,
                    });
                }
                g
            },
            loads: if load_p > 0.0 {
                vec![Load { bus: 1, p_load: load_p, q_load: 0.0 }]
            } else {
                vec![]
            },
        }
    }

    #[test]
    fn no_flow_case_is_flat() {
        let net = two_bus(0.0, false);
        let sol = solve_power_flow(&net, 1e-8, 20).unwrap();
        assert_relative_eq!(sol.voltage_mag[1], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.voltage_ang[1], 0.0, epsilon = 1e-10);
        assert!(residual_infnorm(&net, &sol).unwrap() < 1e-8);
    }

    #[test]
    fn lossless_line_with_held_voltages_gives_arcsin_angle() {
        // P = (V1 V2 / x) sin(θ2) with both magnitudes held at 1.0:
        // injection −1 pu at bus 2 gives θ2 = −arcsin(0.1).
        let net = two_bus(1.0, true);
        let sol = solve_power_flow(&net, 1e-10, 20).unwrap();
        assert_relative_eq!(sol.voltage_ang[1], -(0.1f64.asin()), epsilon = 1e-8);
        assert_relative_eq!(sol.voltage_mag[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pq_load_case_converges_and_residual_matches() {
        let net = two_bus(0.8, false);
        let sol = solve_power_flow(&net, 1e-8, 20).unwrap();
        assert!(sol.iterations <= 10);
        assert!(residual_infnorm(&net, &sol).unwrap() < 1e-8);
        // voltage sags under load through a reactive line
        assert!(sol.voltage_mag[1] < 1.0);
    }

    #[test]
    fn unsolvable_case_reports_divergence() {
        // far beyond the ~5 pu static transfer limit of x = 0.1
        let net = two_bus(60.0, false);
        match solve_power_flow(&net, 1e-8, 20) {
            Err(Error::PowerFlowDiverged { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|s| s.iterations)),
        }
    }
}
