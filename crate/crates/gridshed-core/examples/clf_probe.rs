//! Classifier quality probe on a generated 9-bus dataset.
//! Usage: clf_probe [m] [seed]

use gridshed_core::classifiers::{train_classifier, ClassifierKind, ClassifierTrainConfig};
use gridshed_core::dynamics::{load_contingencies, FsaThresholds, SimParams};
use gridshed_core::grid::Network;
use gridshed_core::scenario::{generate_dataset, split_dataset};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m: usize = args.first().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(77);

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    let base = Network::from_file(dir.join("case9.json")).unwrap();
    let contingencies = load_contingencies(dir.join("contingencies_9bus.json")).unwrap();

    let t0 = std::time::Instant::now();
    let mut ds = generate_dataset(
        &base,
        &contingencies,
        m,
        seed,
        FsaThresholds::default(),
        SimParams::default(),
    )
    .unwrap();
    split_dataset(&mut ds, (0.75, 0.15, 0.10), seed);
    let (safe, unsafe_) = ds.class_counts();
    eprintln!(
        "dataset m={m}: {safe} safe / {unsafe_} unsafe ({:.0}% safe) in {:.0}s",
        100.0 * safe as f64 / m as f64,
        t0.elapsed().as_secs_f64()
    );

    for kind in ClassifierKind::ALL {
        let cfg = ClassifierTrainConfig { seed, ..Default::default() };
        let t0 = std::time::Instant::now();
        let (_, metrics, _) = train_classifier(kind, &base, &ds, &cfg).unwrap();
        println!(
            "{:<4} acc {:6.2} prec {:6.2} rec {:6.2}  train {:6.2}s test {:.3}s  ({:.0}s total)",
            kind.name(),
            metrics.accuracy,
            metrics.precision,
            metrics.recall,
            metrics.train_time_s,
            metrics.test_time_s,
            t0.elapsed().as_secs_f64()
        );
    }
}
