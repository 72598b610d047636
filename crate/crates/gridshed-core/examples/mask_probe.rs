//! Probe the missing-data robustness direction: GNN-backed vs CNN-backed
//! agents evaluated with 25% of buses masked.
//! Usage: mask_probe [episodes] [m_dataset]

use gridshed_core::classifiers::{train_classifier, ClassifierKind, ClassifierTrainConfig};
use gridshed_core::dynamics::{load_contingencies, FsaThresholds, SimParams};
use gridshed_core::env::{StateStats, SurrogateBackend, UflsEnv};
use gridshed_core::grid::Network;
use gridshed_core::sac::{evaluate_safety, train, SacConfig};
use gridshed_core::scenario::{generate_dataset, operating_point_for_row, split_dataset, SplitTag};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let episodes: usize = args.first().and_then(|a| a.parse().ok()).unwrap_or(1200);
    let m: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1000);

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    let base = Network::from_file(dir.join("case9.json")).unwrap();
    let contingencies = load_contingencies(dir.join("contingencies_9bus.json")).unwrap();
    let seed = 77;
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
    let stats = StateStats::from_dataset(&ds, &ds.rows_with_tag(SplitTag::Train));

    let unsafe_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.labels[r] == 0).collect();
    let pool: Vec<_> = unsafe_rows
        .iter()
        .map(|&r| operating_point_for_row(&base, seed, r).unwrap())
        .collect();
    let eval_n = 100.min(pool.len() / 3);
    let (eval_set, train_pool) = pool.split_at(eval_n);

    for kind in [ClassifierKind::Gnn, ClassifierKind::Cnn] {
        let ccfg = ClassifierTrainConfig { seed, ..Default::default() };
        let (model, metrics, _) = train_classifier(kind, &base, &ds, &ccfg).unwrap();
        eprintln!("{}: acc {:.1}", kind.name(), metrics.accuracy);
        for agent_seed in [1u64, 2, 3] {
            let backend = SurrogateBackend::new(model.clone());
            let env = UflsEnv::new(&base, 3, stats.clone(), &backend).unwrap();
            let cfg = SacConfig {
                actor_lr: 1e-3,
                critic_lr: 1e-3,
                alpha: 0.05,
                lambda: 20.0,
                episodes,
                eval_every: 1_000_000,
                seed: agent_seed,
                ..Default::default()
            };
            let (agent, _) = train(&env, train_pool, &[], cfg).unwrap();
            let (unmasked, _) = evaluate_safety(&agent, &env, eval_set, None).unwrap();
            for mask_seed in [agent_seed, 10 + agent_seed] {
                let masked_backend =
                    SurrogateBackend::with_mask_fraction(model.clone(), 0.25, mask_seed);
                let env_m = UflsEnv::new(&base, 3, stats.clone(), &masked_backend).unwrap();
                let (masked, _) = evaluate_safety(&agent, &env_m, eval_set, None).unwrap();
                println!(
                    "{} seed {agent_seed} mask {mask_seed}: unmasked {unmasked:5.1}% masked {masked:5.1}% |Δ| {:.1}",
                    kind.name(),
                    (masked - unmasked).abs()
                );
            }
        }
    }
}
