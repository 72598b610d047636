//! Classical-machine reduction of a solved operating point.
//!
//! Loads become constant admittances at their solved voltages, each machine
//! becomes a constant EMF behind its transient reactance, and the network is
//! Kron-reduced onto the machine internal nodes. The result is a pure ODE in
//! the machine angles and per-unit frequency deviations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{kron_reduce, Network, PowerFlowSolution};

use super::{Contingency, ContingencyKind};

/// Shunt used to short the faulted bus, pu.
const FAULT_ADMITTANCE: f64 = 1e6;

/// Swing-equation system over generator internal nodes.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub y_red: DMatrix<Complex64>,
    /// Internal EMF magnitudes, pu.
    pub e_mag: Vec<f64>,
    /// Mechanical power, pu (balanced against electrical power at t = 0).
    pub p_mech: Vec<f64>,
    pub inertia_h: Vec<f64>,
    pub damping_d: Vec<f64>,
    pub f_nominal: f64,
    /// Sparse cosine terms per machine: (j, E_i E_j |Y_ij|, φ_ij).
    terms: Vec<Vec<(usize, f64, f64)>>,
}

impl ReducedSystem {
    pub fn new(
        y_red: DMatrix<Complex64>,
        e_mag: Vec<f64>,
        p_mech: Vec<f64>,
        inertia_h: Vec<f64>,
        damping_d: Vec<f64>,
        f_nominal: f64,
    ) -> Self {
        let terms = build_terms(&y_red, &e_mag);
        ReducedSystem { y_red, e_mag, p_mech, inertia_h, damping_d, f_nominal, terms }
    }

    pub fn n_machines(&self) -> usize {
        self.e_mag.len()
    }

    /// Electrical power of each machine at the given angles, written into `out`.
    pub fn electrical_power_into(&self, angles: &[f64], out: &mut [f64]) {
        for (i, row) in self.terms.iter().enumerate() {
            let mut p = 0.0;
            for &(j, coeff, phi) in row {
                p += coeff * (angles[i] - angles[j] - phi).cos();
            }
            out[i] = p;
        }
    }
}

fn build_terms(y: &DMatrix<Complex64>, e_mag: &[f64]) -> Vec<Vec<(usize, f64, f64)>> {
    let n = e_mag.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter_map(|j| {
                    let (mag, phi) = y[(i, j)].to_polar();
                    let coeff = e_mag[i] * e_mag[j] * mag;
                    (coeff.abs() > 1e-14).then_some((j, coeff, phi))
                })
                .collect()
        })
        .collect()
}

/// Electrical power per machine: P_ei = V_i Σ_j |Y_ij| V_j cos(θ_i − θ_j − φ_ij).
pub fn electrical_power(angles: &[f64], voltages: &[f64], y_red: &DMatrix<Complex64>) -> Vec<f64> {
    let n = angles.len();
    assert_eq!(voltages.len(), n);
    assert_eq!(y_red.nrows(), n);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (mag, phi) = y_red[(i, j)].to_polar();
                    voltages[i] * mag * voltages[j] * (angles[i] - angles[j] - phi).cos()
                })
                .sum()
        })
        .collect()
}

/// Swing-equation time derivatives at one state.
///
/// Frequency deviations are per-unit: 2H_i dΔf_i/dt = P_m,i − P_e,i − D_i Δf_i,
/// and dδ_i/dt = 2π f_nominal Δf_i rad/s.
pub fn swing_derivative(
    freq_dev_pu: &[f64],
    angles: &[f64],
    sys: &ReducedSystem,
) -> (Vec<f64>, Vec<f64>) {
    let n = sys.n_machines();
    let mut p_e = vec![0.0; n];
    sys.electrical_power_into(angles, &mut p_e);
    let mut dfreq = vec![0.0; n];
    let mut dang = vec![0.0; n];
    let omega = 2.0 * std::f64::consts::PI * sys.f_nominal;
    for i in 0..n {
        dfreq[i] =
            (sys.p_mech[i] - p_e[i] - sys.damping_d[i] * freq_dev_pu[i]) / (2.0 * sys.inertia_h[i]);
        dang[i] = omega * freq_dev_pu[i];
    }
    (dfreq, dang)
}

struct Machine {
    bus: usize,
    inertia_h: f64,
    damping_d: f64,
    x_transient: f64,
    emf: Complex64,
}

/// A solved operating point prepared for time-domain simulation.
pub struct DynamicModel {
    net: Network,
    machines: Vec<Machine>,
    /// Constant-admittance equivalent of each bus's aggregate load.
    load_admittance: Vec<Complex64>,
    /// Pre-contingency solved bus voltages.
    bus_voltage: Vec<Complex64>,
    /// Mechanical power balanced to the pre-contingency electrical power.
    p_mech: Vec<f64>,
    /// Initial machine angles.
    pub delta0: Vec<f64>,
    base: ReducedSystem,
}

impl DynamicModel {
    pub fn new(net: &Network, sol: &PowerFlowSolution) -> Result<Self> {
        let n = net.n_buses();
        let bus_loads = net.bus_loads();
        let bus_voltage: Vec<Complex64> = (0..n).map(|b| sol.complex_voltage(b)).collect();

        // split each bus's generation among its machines in proportion to dispatch
        let mut gen_p_bus = vec![0.0; n];
        let mut gen_q_bus = vec![0.0; n];
        for g in &net.generators {
            let b = g.bus;
            gen_p_bus[b] = sol.p_net[b] + bus_loads[b].0;
            gen_q_bus[b] = sol.q_net[b] + bus_loads[b].1;
        }
        let mut dispatch_sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for g in &net.generators {
            dispatch_sum[g.bus] += g.p_mech.max(0.0);
            count[g.bus] += 1;
        }

        let mut machines = Vec::with_capacity(net.generators.len());
        for g in &net.generators {
            let b = g.bus;
            let share = if dispatch_sum[b] > 0.0 {
                g.p_mech.max(0.0) / dispatch_sum[b]
            } else {
                1.0 / count[b] as f64
            };
            let s = Complex64::new(gen_p_bus[b] * share, gen_q_bus[b] * share);
            let v = bus_voltage[b];
            let current = (s / v).conj();
            let emf = v + Complex64::new(0.0, g.transient_reactance) * current;
            machines.push(Machine {
                bus: b,
                inertia_h: g.inertia_h,
                damping_d: g.damping_d,
                x_transient: g.transient_reactance,
                emf,
            });
        }

        let load_admittance: Vec<Complex64> = (0..n)
            .map(|b| {
                let (p, q) = bus_loads[b];
                let vm2 = bus_voltage[b].norm_sqr();
                Complex64::new(p, -q) / vm2
            })
            .collect();

        let delta0: Vec<f64> = machines.iter().map(|m| m.emf.arg()).collect();

        let mut model = DynamicModel {
            net: net.clone(),
            machines,
            load_admittance,
            bus_voltage,
            p_mech: vec![0.0; net.generators.len()],
            delta0,
            base: ReducedSystem::new(
                DMatrix::zeros(0, 0),
                vec![],
                vec![],
                vec![],
                vec![],
                net.f_nominal,
            ),
        };

        // balance mechanical power against the base-topology electrical power
        // so the pre-contingency trajectory is an exact fixed point
        let mut base = model.reduce(&Topology::base(&model.net))?;
        let mut p_e0 = vec![0.0; model.machines.len()];
        base.electrical_power_into(&model.delta0, &mut p_e0);
        base.p_mech = p_e0.clone();
        model.p_mech = p_e0;
        model.base = base;
        Ok(model)
    }

    pub fn n_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn base_system(&self) -> &ReducedSystem {
        &self.base
    }

    /// Reduce to the machine internal nodes under a given topology state.
    fn reduce(&self, topo: &Topology) -> Result<ReducedSystem> {
        let n = self.net.n_buses();
        let ng = self.machines.len();
        let total = n + ng;
        let mut y = DMatrix::<Complex64>::zeros(total, total);

        for (k, line) in self.net.lines.iter().enumerate() {
            if !topo.line_in_service[k] {
                continue;
            }
            if line.resistance == 0.0 && line.reactance == 0.0 {
                return Err(Error::ZeroImpedanceBranch { line: k });
            }
            let ys = Complex64::new(line.resistance, line.reactance).inv();
            let ysh = Complex64::new(0.0, line.shunt_susceptance / 2.0);
            let (a, b) = (line.from_bus, line.to_bus);
            y[(a, a)] += ys + ysh;
            y[(b, b)] += ys + ysh;
            y[(a, b)] -= ys;
            y[(b, a)] -= ys;
        }
        for b in 0..n {
            y[(b, b)] += self.load_admittance[b];
        }
        if let Some(bus) = topo.fault_bus {
            y[(bus, bus)] += Complex64::new(FAULT_ADMITTANCE, 0.0);
        }
        for &(bus, g_extra) in &topo.extra_load {
            y[(bus, bus)] += Complex64::new(g_extra, 0.0);
        }
        for (i, m) in self.machines.iter().enumerate() {
            let yg = Complex64::new(0.0, m.x_transient).inv();
            let internal = n + i;
            y[(internal, internal)] += yg;
            y[(m.bus, m.bus)] += yg;
            y[(internal, m.bus)] -= yg;
            y[(m.bus, internal)] -= yg;
        }

        let keep: Vec<usize> = (n..total).collect();
        let y_red = kron_reduce(&y, &keep)?;
        Ok(ReducedSystem::new(
            y_red,
            self.machines.iter().map(|m| m.emf.norm()).collect(),
            self.p_mech.clone(),
            self.machines.iter().map(|m| m.inertia_h).collect(),
            self.machines.iter().map(|m| m.damping_d).collect(),
            self.net.f_nominal,
        ))
    }

    /// Piecewise-constant system segments induced by a contingency,
    /// as (start time, system) pairs.
    pub(crate) fn segments(&self, contingency: Option<&Contingency>) -> Result<Vec<(f64, ReducedSystem)>> {
        let mut out = vec![(0.0, self.base.clone())];
        let Some(c) = contingency else { return Ok(out) };
        c.validate(&self.net)?;
        match c.kind {
            ContingencyKind::LineTrip => {
                let mut topo = Topology::base(&self.net);
                topo.line_in_service[c.location] = false;
                out.push((c.t_apply, self.reduce(&topo)?));
            }
            ContingencyKind::LoadStep => {
                let mut topo = Topology::base(&self.net);
                let vm2 = self.bus_voltage[c.location].norm_sqr();
                topo.extra_load.push((c.location, c.magnitude / vm2));
                out.push((c.t_apply, self.reduce(&topo)?));
            }
            ContingencyKind::ThreePhaseFault => {
                let line = &self.net.lines[c.location];
                let mut during = Topology::base(&self.net);
                during.fault_bus = Some(line.to_bus);
                out.push((c.t_apply, self.reduce(&during)?));
                let mut after = Topology::base(&self.net);
                after.line_in_service[c.location] = false;
                out.push((c.t_apply + c.fault_duration, self.reduce(&after)?));
            }
        }
        Ok(out)
    }
}

struct Topology {
    line_in_service: Vec<bool>,
    fault_bus: Option<usize>,
    extra_load: Vec<(usize, f64)>,
}

impl Topology {
    fn base(net: &Network) -> Self {
        Topology {
            line_in_service: net.lines.iter().map(|l| l.in_service).collect(),
            fault_bus: None,
            extra_load: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_has_zero_derivatives() {
        let sys = ReducedSystem::new(
            DMatrix::from_row_slice(1, 1, &[Complex64::new(0.3, -2.0)]),
            vec![1.0],
            vec![0.3], // equals E^2 Re(Y11)
            vec![1.0],
            vec![1.0],
            60.0,
        );
        let (df, da) = swing_derivative(&[0.0], &[0.0], &sys);
        assert_relative_eq!(df[0], 0.0, epsilon = 1e-15);
        assert_eq!(da[0], 0.0);
    }

    #[test]
    fn unit_imbalance_accelerates_at_half_per_unit() {
        // 2H dΔf/dt = ΔP with H = 1, ΔP = 1 → 0.5 pu/s
        let sys = ReducedSystem::new(
            DMatrix::from_row_slice(1, 1, &[Complex64::new(0.0, -2.0)]),
            vec![1.0],
            vec![1.0],
            vec![1.0],
            vec![1.0],
            60.0,
        );
        let (df, _) = swing_derivative(&[0.0], &[0.0], &sys);
        assert_relative_eq!(df[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn steady_state_deviation_is_fixed_point() {
        // Δf = ΔP / D is the fixed point of Eq. 1
        let sys = ReducedSystem::new(
            DMatrix::from_row_slice(1, 1, &[Complex64::new(0.0, -2.0)]),
            vec![1.0],
            vec![0.4],
            vec![1.0],
            vec![2.0],
            60.0,
        );
        let (df, _) = swing_derivative(&[0.2], &[0.0], &sys);
        assert_relative_eq!(df[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn purely_reactive_network_at_equal_angles_transfers_nothing() {
        let y = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, -10.0),
                Complex64::new(0.0, 10.0),
                Complex64::new(0.0, 10.0),
                Complex64::new(0.0, -10.0),
            ],
        );
        let p = electrical_power(&[0.3, 0.3], &[1.0, 1.0], &y);
        assert_relative_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_machine_hand_evaluation() {
        // P_e1 = |Y12| cos(0.1 − π/2) with unit voltages and no self-conductance
        let y = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, -10.0),
                Complex64::new(0.0, 10.0),
                Complex64::new(0.0, 10.0),
                Complex64::new(0.0, -10.0),
            ],
        );
        let p = electrical_power(&[0.1, 0.0], &[1.0, 1.0], &y);
        let expect = 10.0 * (0.1 - std::f64::consts::FRAC_PI_2).cos();
        // the diagonal term is purely reactive and contributes nothing
        assert_relative_eq!(p[0], expect, epsilon = 1e-12);
    }

    #[test]
    fn lossless_network_conserves_power_over_random_angles() {
        let mut rng = crate::rng::substream(3, "lossless", 0);
        use rand::Rng;
        for _ in 0..20 {
            let n = 4;
            let mut y = DMatrix::<Complex64>::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let b = rng.gen_range(0.5..5.0);
                    y[(i, j)] = Complex64::new(0.0, b);
                    y[(j, i)] = Complex64::new(0.0, b);
                    y[(i, i)] -= Complex64::new(0.0, b);
                    y[(j, j)] -= Complex64::new(0.0, b);
                }
            }
            let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let volts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.9..1.1)).collect();
            let p = electrical_power(&angles, &volts, &y);
            let total: f64 = p.iter().sum();
            assert_relative_eq!(total, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn reduced_system_cached_power_matches_direct_formula() {
        let y = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.2, -8.0),
                Complex64::new(-0.9, 6.0),
                Complex64::new(-0.9, 6.0),
                Complex64::new(0.8, -7.0),
            ],
        );
        let e = vec![1.05, 0.98];
        let sys = ReducedSystem::new(y.clone(), e.clone(), vec![0.0; 2], vec![1.0; 2], vec![1.0; 2], 60.0);
        let angles = [0.21, -0.13];
        let direct = electrical_power(&angles, &e, &y);
        let mut cached = vec![0.0; 2];
        sys.electrical_power_into(&angles, &mut cached);
        assert_relative_eq!(direct[0], cached[0], epsilon = 1e-12);
        assert_relative_eq!(direct[1], cached[1], epsilon = 1e-12);
    }
}
