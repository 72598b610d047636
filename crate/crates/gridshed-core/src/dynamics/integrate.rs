//! Fixed-step RK4 integration of the swing equation.

use std::io::Write;

use crate::error::{Error, Result};

use super::model::{DynamicModel, ReducedSystem};
use super::Contingency;

/// Deviation (Hz) beyond which the trajectory is flagged unstable and truncated.
const BLOWUP_HZ: f64 = 10.0;

#[derive(Clone, Copy, Debug)]
pub struct SimParams {
    /// Integration step, seconds.
    pub dt: f64,
    /// Simulation horizon, seconds.
    pub horizon: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { dt: 1e-3, horizon: 20.0 }
    }
}

/// Per-generator frequency time series with its extrema.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Row-major (machine, time) frequencies in Hz.
    pub freq: Vec<f64>,
    pub n_machines: usize,
    /// Lowest frequency over all machines and times, Hz.
    pub nadir: f64,
    /// Highest frequency over all machines and times, Hz.
    pub peak: f64,
    /// True when the simulation was cut short by the instability guard.
    pub truncated: bool,
}

impl TrajectoryRecord {
    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn frequency(&self, machine: usize, sample: usize) -> f64 {
        self.freq[machine * self.times.len() + sample]
    }

    pub fn machine_series(&self, machine: usize) -> &[f64] {
        let t = self.times.len();
        &self.freq[machine * t..(machine + 1) * t]
    }

    /// CSV export with header `time,gen_0,...,gen_{NG-1}`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        write!(w, "time")?;
        for g in 0..self.n_machines {
            write!(w, ",gen_{}", g)?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{}", t)?;
            for g in 0..self.n_machines {
                write!(w, ",{}", self.frequency(g, k))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Extract (f_min, f_max) over all machines and sampled times.
pub fn frequency_nadir(traj: &TrajectoryRecord) -> Result<(f64, f64)> {
    if traj.times.is_empty() || traj.freq.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let f_min = traj.freq.iter().copied().fold(f64::INFINITY, f64::min);
    let f_max = traj.freq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((f_min, f_max))
}

/// Integrate the post-contingency swing dynamics from the model's solved
/// equilibrium. The contingency switches the reduced network at its event
/// times (snapped to the step grid); state is (δ, Δf) per machine.
pub fn integrate_swing(
    model: &DynamicModel,
    contingency: Option<&Contingency>,
    params: SimParams,
) -> Result<TrajectoryRecord> {
    let segments = model.segments(contingency)?;
    let n_steps = (params.horizon / params.dt).round() as usize;
    let events: Vec<(usize, &ReducedSystem)> = segments
        .iter()
        .map(|(t, sys)| (((t / params.dt).round() as usize).min(n_steps), sys))
        .collect();
    run_rk4(&events, &model.delta0, params)
}

/// Integrate a fixed reduced system from the given initial angles with zero
/// initial frequency deviation. Used directly by accuracy oracles.
pub fn integrate_reduced(
    sys: &ReducedSystem,
    delta0: &[f64],
    params: SimParams,
) -> Result<TrajectoryRecord> {
    run_rk4(&[(0usize, sys)], delta0, params)
}

fn run_rk4(
    events: &[(usize, &ReducedSystem)],
    delta0: &[f64],
    params: SimParams,
) -> Result<TrajectoryRecord> {
    assert!(params.dt > 0.0 && params.dt < 0.02, "dt must be in (0, 0.02) s");
    let mut events: Vec<(usize, &ReducedSystem)> = events.to_vec();
    events.sort_by_key(|(k, _)| *k);
    let n_steps = (params.horizon / params.dt).round() as usize;
    let ng = delta0.len();
    let f_nom = events[0].1.f_nominal;

    let mut delta = delta0.to_vec();
    let mut freq = vec![0.0f64; ng]; // per-unit deviations
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut series = vec![Vec::with_capacity(n_steps + 1); ng];

    let mut nadir = f64::INFINITY;
    let mut peak = f64::NEG_INFINITY;
    let mut truncated = false;

    let record = |t: f64, freq: &[f64], times: &mut Vec<f64>, series: &mut Vec<Vec<f64>>,
                      nadir: &mut f64, peak: &mut f64| {
        times.push(t);
        for (g, df) in freq.iter().enumerate() {
            let hz = f_nom * (1.0 + df);
            series[g].push(hz);
            *nadir = nadir.min(hz);
            *peak = peak.max(hz);
        }
    };

    let mut active = 0usize;
    let mut sys = events[0].1;
    record(0.0, &freq, &mut times, &mut series, &mut nadir, &mut peak);

    let mut k1f = vec![0.0; ng];
    let mut k1a = vec![0.0; ng];
    let mut k2f = vec![0.0; ng];
    let mut k2a = vec![0.0; ng];
    let mut k3f = vec![0.0; ng];
    let mut k3a = vec![0.0; ng];
    let mut k4f = vec![0.0; ng];
    let mut k4a = vec![0.0; ng];
    let mut tf = vec![0.0; ng];
    let mut ta = vec![0.0; ng];
    let mut pe = vec![0.0; ng];

    let omega = 2.0 * std::f64::consts::PI * f_nom;
    let derive = |sys: &ReducedSystem,
                      f: &[f64],
                      a: &[f64],
                      df: &mut [f64],
                      da: &mut [f64],
                      pe: &mut [f64]| {
        sys.electrical_power_into(a, pe);
        for i in 0..ng {
            df[i] = (sys.p_mech[i] - pe[i] - sys.damping_d[i] * f[i]) / (2.0 * sys.inertia_h[i]);
            da[i] = omega * f[i];
        }
    };

    for step in 0..n_steps {
        while active + 1 < events.len() && events[active + 1].0 <= step {
            active += 1;
            sys = events[active].1;
        }
        let h = params.dt;

        derive(sys, &freq, &delta, &mut k1f, &mut k1a, &mut pe);
        for i in 0..ng {
            tf[i] = freq[i] + 0.5 * h * k1f[i];
            ta[i] = delta[i] + 0.5 * h * k1a[i];
        }
        derive(sys, &tf, &ta, &mut k2f, &mut k2a, &mut pe);
        for i in 0..ng {
            tf[i] = freq[i] + 0.5 * h * k2f[i];
            ta[i] = delta[i] + 0.5 * h * k2a[i];
        }
        derive(sys, &tf, &ta, &mut k3f, &mut k3a, &mut pe);
        for i in 0..ng {
            tf[i] = freq[i] + h * k3f[i];
            ta[i] = delta[i] + h * k3a[i];
        }
        derive(sys, &tf, &ta, &mut k4f, &mut k4a, &mut pe);
        for i in 0..ng {
            freq[i] += h / 6.0 * (k1f[i] + 2.0 * k2f[i] + 2.0 * k3f[i] + k4f[i]);
            delta[i] += h / 6.0 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i]);
        }

        record(
            (step + 1) as f64 * params.dt,
            &freq,
            &mut times,
            &mut series,
            &mut nadir,
            &mut peak,
        );

        if freq.iter().any(|&f| !f.is_finite() || (f * f_nom).abs() > BLOWUP_HZ) {
            truncated = true;
            break;
        }
    }

    let t = times.len();
    let mut flat = Vec::with_capacity(ng * t);
    for s in series {
        flat.extend_from_slice(&s);
    }
    Ok(TrajectoryRecord { times, freq: flat, n_machines: ng, nadir, peak, truncated })
}
