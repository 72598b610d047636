//! 39-bus sanity probe: power-flow convergence, per-contingency severity
//! across sampled operating points, and TDS timing per FSA call.

use gridshed_core::dynamics::{run_fsa_tds, Contingency, ContingencyKind, FsaThresholds, SimParams};
use gridshed_core::grid::{solve_power_flow, Network};
use gridshed_core::scenario::operating_point_for_row;

fn trip(line: usize) -> Contingency {
    Contingency {
        kind: ContingencyKind::LineTrip,
        location: line,
        magnitude: 0.0,
        t_apply: 1.0,
        fault_duration: 0.083,
    }
}

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    let base = Network::from_file(dir.join("case39.json")).unwrap();
    let sol = solve_power_flow(&base, 1e-8, 20).unwrap();
    println!(
        "base case converged in {} iterations; slack P = {:.3} pu",
        sol.iterations,
        sol.p_net[base.slack_bus()] + 0.092
    );

    let thresholds = FsaThresholds::default();
    let sim = SimParams::default();

    // candidate non-islanding trips (0-based line ids)
    // 23: 14-15, 25: 16-17, 27: 16-21, 34: 21-22, 39: 25-26, 42: 26-28
    let candidates = [3usize, 6, 8, 10, 25, 27, 28, 29, 30, 35, 37, 39, 42, 43, 44];
    let n_points = 12;
    let ops: Vec<_> =
        (0..n_points).map(|r| operating_point_for_row(&base, 31, r).unwrap()).collect();

    for &line in &candidates {
        let c = Contingency {
            kind: ContingencyKind::ThreePhaseFault,
            location: line,
            magnitude: 0.0,
            t_apply: 1.0,
            fault_duration: 0.05,
        };
        let mut n_unsafe = 0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let t0 = std::time::Instant::now();
        for op in &ops {
            let v = run_fsa_tds(&op.network, &op.solution, std::slice::from_ref(&c), thresholds, sim)
                .unwrap();
            let e = &v.per_contingency[0];
            lo = lo.min(e.f_min);
            hi = hi.max(e.f_max);
            if !v.safe {
                n_unsafe += 1;
            }
        }
        let l = &base.lines[line];
        println!(
            "fault L{line:<2} ({}-{})  unsafe {n_unsafe:>2}/{n_points}  f_min {lo:.2} f_max {hi:.2}  ({:.2}s per sim)",
            l.from_bus + 1,
            l.to_bus + 1,
            t0.elapsed().as_secs_f64() / n_points as f64
        );
    }
}
