//! Individual subcommand implementations.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;

use gridshed_core::classifiers::{
    save_model, train_classifier, ClassifierKind, ClassifierTrainConfig, Metrics,
};
use gridshed_core::dynamics::{integrate_swing, DynamicModel, SimParams};
use gridshed_core::env::UflsEnv;
use gridshed_core::grid::solve_power_flow;
use gridshed_core::sac::{evaluate_safety, load_agent, save_agent, train, SacConfig};
use gridshed_core::scenario::{
    generate_dataset, operating_point_for_row, split_dataset, write_dataset, DatasetManifest,
};

use crate::config::SacOverrides;
use crate::util::{
    build_backend, default_sim, default_thresholds, load_case, load_contingency_file,
    load_dataset_checked, state_stats, unsafe_pool, write_text,
};

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub contingencies: PathBuf,
    #[arg(long, short = 'n')]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let (base, case_text) = load_case(&args.case)?;
    let (contingencies, cont_text) = load_contingency_file(&args.contingencies)?;
    let started = Instant::now();
    let mut ds = generate_dataset(
        &base,
        &contingencies,
        args.n,
        args.seed,
        default_thresholds(),
        default_sim(),
    )?;
    split_dataset(&mut ds, (0.75, 0.15, 0.10), args.seed);
    let manifest = DatasetManifest::new(
        &ds,
        args.seed,
        &args.case.to_string_lossy(),
        &case_text,
        &cont_text,
    );
    write_dataset(&args.out, &ds, &manifest)?;
    let (safe, unsafe_) = ds.class_counts();
    println!(
        "wrote {} rows ({safe} safe / {unsafe_} unsafe) to {} in {:.1}s",
        ds.n_rows(),
        args.out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainFsaArgs {
    #[arg(long, value_parser = ["dt", "svm", "mlp", "cnn", "gnn"])]
    pub model: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint stem (writes <out>.json and, for neural kinds, <out>.bin).
    #[arg(long)]
    pub out: PathBuf,
}

/// Table-I style CSV line for one trained classifier.
pub fn metrics_csv_row(kind: &str, m: &Metrics, seed: u64, config_hash: &str) -> String {
    format!(
        "{kind},{:.4},{:.4},{:.4},{:.4},{:.4},{seed},{config_hash}",
        m.accuracy, m.precision, m.recall, m.train_time_s, m.test_time_s
    )
}

pub const METRICS_CSV_HEADER: &str =
    "model,accuracy,precision,recall,train_time_s,test_time_s,seed,config_hash";

pub fn train_fsa(args: &TrainFsaArgs) -> Result<Metrics> {
    let (base, case_text) = load_case(&args.case)?;
    let (ds, _) = load_dataset_checked(&args.data, &case_text, None)?;
    let kind: ClassifierKind = args.model.parse()?;
    let cfg = ClassifierTrainConfig { seed: args.seed, ..Default::default() };
    let (model, metrics, _) = train_classifier(kind, &base, &ds, &cfg)?;
    save_model(&args.out, &model, args.seed)?;
    println!("{METRICS_CSV_HEADER}");
    println!("{}", metrics_csv_row(kind.name(), &metrics, args.seed, "-"));
    Ok(metrics)
}

#[derive(Args, Debug, Clone)]
pub struct TrainAgentArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub contingencies: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = ["tds", "dt", "svm", "mlp", "cnn", "gnn"])]
    pub fsa: String,
    /// Checkpoint stem of the surrogate classifier (non-TDS backends).
    #[arg(long)]
    pub fsa_ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub shed_buses: usize,
    #[arg(long, default_value_t = 100)]
    pub eval_points: usize,
    /// Actor learning rate (paper value 1e-7; desk runs want ~1e-3).
    #[arg(long)]
    pub actor_lr: Option<f64>,
    #[arg(long)]
    pub critic_lr: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub fn sac_config(
    lambda: f64,
    episodes: usize,
    seed: u64,
    overrides: &SacOverrides,
) -> SacConfig {
    let mut cfg = SacConfig { lambda, episodes, seed, ..Default::default() };
    if let Some(v) = overrides.actor_lr {
        cfg.actor_lr = v;
    }
    if let Some(v) = overrides.critic_lr {
        cfg.critic_lr = v;
    }
    if let Some(v) = overrides.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = overrides.start_steps {
        cfg.start_steps = v;
    }
    if let Some(v) = overrides.batch_size {
        cfg.batch_size = v;
    }
    cfg
}

pub struct AgentRun {
    pub safety_classifier: f64,
    pub safety_tds: f64,
    pub shed: f64,
    pub train_wall_s: f64,
    pub eval_wall_s: f64,
}

/// Train one agent and evaluate it on its own backend and on the TDS ground
/// truth; persists the agent and a per-checkpoint report CSV under `out`.
pub fn train_agent_run(args: &TrainAgentArgs, overrides: &SacOverrides) -> Result<AgentRun> {
    let (base, case_text) = load_case(&args.case)?;
    let (contingencies, cont_text) = load_contingency_file(&args.contingencies)?;
    let (ds, manifest) = load_dataset_checked(&args.data, &case_text, Some(&cont_text))?;
    let stats = state_stats(&ds);
    let (eval_set, train_pool) = unsafe_pool(&base, &ds, &manifest, args.eval_points)?;

    let backend = build_backend(&args.fsa, &contingencies, args.fsa_ckpt.as_deref(), None)?;
    let env = UflsEnv::new(&base, args.shed_buses, stats.clone(), backend.as_ref())?;
    let cfg = sac_config(args.lambda, args.episodes, args.seed, overrides);

    let t0 = Instant::now();
    let (agent, report) = train(&env, &train_pool, &eval_set, cfg)?;
    let train_wall_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (safety_classifier, shed) = evaluate_safety(&agent, &env, &eval_set, None)?;
    let eval_wall_s = t1.elapsed().as_secs_f64();
    let tds = build_backend("tds", &contingencies, None, None)?;
    let env_tds = UflsEnv::new(&base, args.shed_buses, stats, tds.as_ref())?;
    let (safety_tds, _) = evaluate_safety(&agent, &env_tds, &eval_set, None)?;

    std::fs::create_dir_all(&args.out)?;
    save_agent(args.out.join("agent"), &agent)?;
    let mut csv = String::from("episode,safety_pct,total_shed,wallclock_s\n");
    for c in &report.checkpoints {
        csv.push_str(&format!(
            "{},{:.4},{:.4},{:.4}\n",
            c.episode, c.safety_pct, c.mean_total_shed, report.wall_clock_s
        ));
    }
    write_text(args.out.join("report.csv"), &csv)?;
    let summary = serde_json::json!({
        "backend": args.fsa,
        "lambda": args.lambda,
        "episodes": args.episodes,
        "seed": args.seed,
        "safety_classifier": safety_classifier,
        "safety_tds": safety_tds,
        "total_shed": shed,
        "train_wall_s": train_wall_s,
        "eval_wall_s": eval_wall_s,
    });
    write_text(args.out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;

    println!(
        "{} λ={} seed={}: safety {:.1}% (classifier) {:.1}% (tds), shed {:.3}, {:.0}s",
        args.fsa, args.lambda, args.seed, safety_classifier, safety_tds, shed, train_wall_s
    );
    Ok(AgentRun { safety_classifier, safety_tds, shed, train_wall_s, eval_wall_s })
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub contingencies: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Agent checkpoint stem (directory containing agent.actor.* etc).
    #[arg(long)]
    pub agent: PathBuf,
    #[arg(long, value_parser = ["tds", "dt", "svm", "mlp", "cnn", "gnn"])]
    pub fsa: String,
    #[arg(long)]
    pub fsa_ckpt: Option<PathBuf>,
    /// Zero all features at this fraction of buses before classification.
    #[arg(long)]
    pub mask_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub mask_seed: u64,
    #[arg(long, default_value_t = 100)]
    pub eval_points: usize,
    #[arg(long, default_value_t = 7)]
    pub shed_buses: usize,
}

pub fn evaluate_agent(args: &EvaluateArgs) -> Result<(f64, f64)> {
    let (base, case_text) = load_case(&args.case)?;
    let (contingencies, cont_text) = load_contingency_file(&args.contingencies)?;
    let (ds, manifest) = load_dataset_checked(&args.data, &case_text, Some(&cont_text))?;
    let stats = state_stats(&ds);
    let (eval_set, _) = unsafe_pool(&base, &ds, &manifest, args.eval_points)?;
    let mask = args.mask_fraction.map(|f| (f, args.mask_seed));
    let backend = build_backend(&args.fsa, &contingencies, args.fsa_ckpt.as_deref(), mask)?;
    let env = UflsEnv::new(&base, args.shed_buses, stats, backend.as_ref())?;
    let agent = load_agent(args.agent.join("agent"))?;
    let (safety, shed) = evaluate_safety(&agent, &env, &eval_set, None)?;
    println!("safety {:.1}% mean_shed {:.3} on {} points", safety, shed, eval_set.len());
    Ok((safety, shed))
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub contingencies: PathBuf,
    /// Index into the contingency file.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Replay a sampled operating point instead of the base case.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub row: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
}

pub fn replay_trajectory(args: &ReplayArgs) -> Result<()> {
    let (base, _) = load_case(&args.case)?;
    let (contingencies, _) = load_contingency_file(&args.contingencies)?;
    let c = contingencies
        .get(args.index)
        .with_context(|| format!("contingency index {} out of range", args.index))?;
    let (net, sol) = match args.seed {
        Some(seed) => {
            let op = operating_point_for_row(&base, seed, args.row)?;
            (op.network, op.solution)
        }
        None => {
            let sol = solve_power_flow(&base, 1e-8, 20)?;
            (base, sol)
        }
    };
    let model = DynamicModel::new(&net, &sol)?;
    let traj = integrate_swing(&model, Some(c), SimParams { dt: 1e-3, horizon: args.horizon })?;
    if let Some(dir) = args.out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(&args.out)?;
    traj.write_csv(std::io::BufWriter::new(file))?;
    println!(
        "wrote {} samples (nadir {:.3} Hz, peak {:.3} Hz{}) to {}",
        traj.n_samples(),
        traj.nadir,
        traj.peak,
        if traj.truncated { ", truncated" } else { "" },
        args.out.display()
    );
    Ok(())
}
