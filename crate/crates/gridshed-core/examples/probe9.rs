//! Exploration harness for tuning the bundled 9-bus contingency set.
//! Usage: probe9 [D0 D1 D2] — optional per-machine damping overrides.
//! Prints union class balance and shed-fixability for candidate sets.

use gridshed_core::dynamics::{run_fsa_tds, Contingency, ContingencyKind, FsaThresholds, SimParams};
use gridshed_core::grid::{solve_power_flow, Network};
use gridshed_core::scenario::{apply_scales, operating_point_for_row};

fn trip(line: usize) -> Contingency {
    Contingency {
        kind: ContingencyKind::LineTrip,
        location: line,
        magnitude: 0.0,
        t_apply: 1.0,
        fault_duration: 0.083,
    }
}

fn fault(line: usize, dur: f64) -> Contingency {
    Contingency {
        kind: ContingencyKind::ThreePhaseFault,
        location: line,
        magnitude: 0.0,
        t_apply: 1.0,
        fault_duration: dur,
    }
}

fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases/case9.json");
    let mut base = Network::from_file(path).unwrap();
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if args.len() == 3 {
        for (g, d) in base.generators.iter_mut().zip(&args) {
            g.damping_d = *d;
        }
        println!("damping override: {:?}", args);
    }
    let thresholds = FsaThresholds::default();
    let sim = SimParams::default();
    let n_points = 60;

    let sets: Vec<(&str, Vec<Contingency>)> = vec![
        ("final5: t4 t7 f8.05 t6 step4@0.3", vec![
            trip(4), trip(7), fault(8, 0.05), trip(6),
            Contingency { kind: ContingencyKind::LoadStep, location: 4, magnitude: 0.3, t_apply: 1.0, fault_duration: 0.083 },
        ]),
    ];

    let mut ops = Vec::new();
    for row in 0..n_points {
        ops.push(operating_point_for_row(&base, 2024, row).unwrap());
    }

    for (name, set) in &sets {
        let mut n_unsafe = 0;
        let mut fix_full = 0; // 20% shed everywhere
        let mut fix_half = 0; // 10% shed everywhere
        for op in &ops {
            let v = run_fsa_tds(&op.network, &op.solution, set, thresholds, sim).unwrap();
            if v.safe {
                continue;
            }
            n_unsafe += 1;
            let shed_safe = |factor: f64| -> bool {
                let scale: Vec<f64> = op.load_scale.iter().map(|s| s * factor).collect();
                let net = apply_scales(&base, &op.gen_scale, &scale);
                match solve_power_flow(&net, 1e-8, 20) {
                    Ok(sol) => run_fsa_tds(&net, &sol, set, thresholds, sim).unwrap().safe,
                    Err(_) => false,
                }
            };
            if shed_safe(0.8) {
                fix_full += 1;
            }
            if shed_safe(0.9) {
                fix_half += 1;
            }
        }
        println!(
            "{name:<38} unsafe {n_unsafe:>2}/{n_points}  fix@20% {fix_full:>2}  fix@10% {fix_half:>2}"
        );
    }
}
