use gridshed_core::dynamics::{integrate_swing, Contingency, ContingencyKind, DynamicModel, SimParams};
use gridshed_core::grid::{solve_power_flow, Network};

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    let base = Network::from_file(dir.join("case39.json")).unwrap();
    let sol = solve_power_flow(&base, 1e-8, 20).unwrap();
    let model = DynamicModel::new(&base, &sol).unwrap();
    let c = Contingency { kind: ContingencyKind::LineTrip, location: 2, magnitude: 0.0, t_apply: 0.5, fault_duration: 0.083 };
    let traj = integrate_swing(&model, Some(&c), SimParams { dt: 1e-3, horizon: 5.0 }).unwrap();
    println!("samples {} truncated {}", traj.n_samples(), traj.truncated);
    let t = traj.n_samples() - 1;
    for g in 0..10 {
        println!(
            "gen {g} (bus {}): f(0.6s) {:.3} f(end={:.3}s) {:.3}",
            base.generators[g].bus + 1,
            traj.frequency(g, ((0.6 / 1e-3) as usize).min(t)),
            traj.times[t],
            traj.frequency(g, t)
        );
    }
}
