//! Desk-scale SAC learning probe: trains at several λ values against a GNN
//! surrogate and prints the resulting safety/shed, evaluated on both the
//! surrogate and the TDS ground truth.
//! Usage: rl_probe [episodes] [actor_lr] [critic_lr] [alpha] [m_dataset]

use gridshed_core::classifiers::{train_classifier, ClassifierKind, ClassifierTrainConfig};
use gridshed_core::dynamics::{load_contingencies, FsaThresholds, SimParams};
use gridshed_core::env::{StateStats, SurrogateBackend, TdsBackend, UflsEnv};
use gridshed_core::grid::Network;
use gridshed_core::sac::{evaluate_safety, train, SacConfig};
use gridshed_core::scenario::{
    generate_dataset, operating_point_for_row, split_dataset, SplitTag,
};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let episodes: usize = args.first().and_then(|a| a.parse().ok()).unwrap_or(800);
    let actor_lr: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1e-3);
    let critic_lr: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1e-3);
    let alpha: f64 = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(0.05);
    let m: usize = args.get(4).and_then(|a| a.parse().ok()).unwrap_or(600);

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    let base = Network::from_file(dir.join("case9.json")).unwrap();
    let contingencies = load_contingencies(dir.join("contingencies_9bus.json")).unwrap();
    let thresholds = FsaThresholds::default();
    let sim = SimParams::default();

    eprintln!("generating {m}-point dataset...");
    let t0 = std::time::Instant::now();
    let seed = 77;
    let mut ds = generate_dataset(&base, &contingencies, m, seed, thresholds, sim).unwrap();
    split_dataset(&mut ds, (0.75, 0.15, 0.10), seed);
    let (safe, unsafe_) = ds.class_counts();
    eprintln!("dataset: {safe} safe / {unsafe_} unsafe in {:.1}s", t0.elapsed().as_secs_f64());

    let stats = StateStats::from_dataset(&ds, &ds.rows_with_tag(SplitTag::Train));

    eprintln!("training GNN surrogate...");
    let cfg = ClassifierTrainConfig { seed, ..Default::default() };
    let (gnn, metrics, _) = train_classifier(ClassifierKind::Gnn, &base, &ds, &cfg).unwrap();
    eprintln!(
        "gnn: acc {:.1} prec {:.1} rec {:.1}",
        metrics.accuracy, metrics.precision, metrics.recall
    );

    // unsafe pool from the dataset rows; train/eval split of the pool
    let unsafe_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.labels[r] == 0).collect();
    let pool: Vec<_> = unsafe_rows
        .iter()
        .map(|&r| operating_point_for_row(&base, seed, r).unwrap())
        .collect();
    let eval_n = 100.min(pool.len() / 3);
    let (eval_set, train_pool) = pool.split_at(eval_n);
    eprintln!("unsafe pool: {} train, {} eval", train_pool.len(), eval_set.len());

    let tds = TdsBackend { contingencies: contingencies.clone(), thresholds, sim };

    for lambda in [0.0, 2.0, 20.0] {
        let backend = SurrogateBackend::new(gnn.clone());
        let env = UflsEnv::new(&base, 3, stats.clone(), &backend).unwrap();
        let cfg = SacConfig {
            actor_lr,
            critic_lr,
            alpha,
            lambda,
            episodes,
            eval_every: 1_000_000, // no mid-train checkpoints in the probe
            seed: 7,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let (agent, report) = train(&env, train_pool, &[], cfg).unwrap();
        let (safety_sur, shed_sur) = evaluate_safety(&agent, &env, eval_set, None).unwrap();
        let env_tds = UflsEnv::new(&base, 3, stats.clone(), &tds).unwrap();
        let (safety_tds, shed_tds) = evaluate_safety(&agent, &env_tds, eval_set, None).unwrap();
        let tail: f64 = report.episode_returns.iter().rev().take(100).sum::<f64>() / 100.0;
        println!(
            "λ={lambda:<4} safety(sur) {safety_sur:5.1}% shed {shed_sur:.3} | safety(tds) {safety_tds:5.1}% shed {shed_tds:.3} | tail return {tail:.3} | {:.0}s",
            t0.elapsed().as_secs_f64()
        );
    }
}
