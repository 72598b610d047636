//! SAC training and evaluation loops over the UFLS environment.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{Action, UflsEnv};
use crate::error::Result;
use crate::grid::Network;
use crate::rng::substream;
use crate::scenario::OperatingPoint;

use super::agent::{SacAgent, SacConfig};
use super::replay::{ReplayBuffer, StoredTransition};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub episode: usize,
    pub safety_pct: f64,
    pub mean_total_shed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct TrainReport {
    /// Safety/shed on the fixed unsafe evaluation set, every `eval_every`
    /// episodes.
    pub checkpoints: Vec<CheckpointStat>,
    /// Undiscounted raw return per episode (λ = 0 view: −total shed).
    pub episode_returns: Vec<f64>,
    /// Whether each episode ended in a safe state.
    pub episode_safe: Vec<bool>,
    pub wall_clock_s: f64,
}

/// Train per the SAC loop: act, store, gradient steps, target EMA; every
/// `eval_every` episodes the deterministic policy is measured on `eval_set`.
pub fn train(
    env: &UflsEnv,
    train_pool: &[OperatingPoint],
    eval_set: &[OperatingPoint],
    cfg: SacConfig,
) -> Result<(SacAgent, TrainReport)> {
    let state_dim = 2 * train_pool
        .first()
        .map(|op| op.network.n_buses())
        .unwrap_or(env.shed_buses.len());
    let mut agent = SacAgent::new(state_dim, env.n_actions(), cfg);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut report = TrainReport::default();
    let started = Instant::now();

    let mut reset_rng = substream(cfg.seed, "sac-reset", 0);
    let mut explore_rng = substream(cfg.seed, "sac-explore", 0);
    let mut noise_rng = substream(cfg.seed, "sac-noise", 0);
    let mut update_rng = substream(cfg.seed, "sac-update", 0);
    let mut total_steps = 0usize;

    for episode in 0..cfg.episodes {
        let mut state = env.reset(train_pool, &mut reset_rng)?;
        let mut episode_return = 0.0;
        let mut ended_safe = false;
        while !state.done {
            let obs = env.assemble(&state);
            let (action, continuous) = if total_steps < cfg.start_steps {
                let flags: Vec<bool> =
                    (0..env.n_actions()).map(|_| rand::Rng::gen_bool(&mut explore_rng, 0.5)).collect();
                let cont: Vec<f64> =
                    flags.iter().map(|&f| if f { 0.5 } else { -0.5 }).collect();
                (Action { flags }, cont)
            } else {
                let (a, cont, _) = agent.sample_action(&obs, Some(&mut noise_rng))?;
                (a, cont)
            };
            let t = env.step(&mut state, &action)?;
            episode_return += t.reward;
            ended_safe = t.constraint_c == 1;
            buffer.push(StoredTransition {
                state: t.state,
                action: continuous,
                reward: t.reward,
                constraint_c: t.constraint_c,
                next_state: t.next_state,
                done: t.done,
            });
            total_steps += 1;

            if buffer.len() >= cfg.batch_size {
                for _ in 0..cfg.updates_per_step {
                    let indices = buffer.sample_indices(&mut update_rng, cfg.batch_size);
                    agent.critic_update(&buffer, &indices, &mut update_rng)?;
                    agent.actor_update(&buffer, &indices, &mut update_rng)?;
                    agent.target_update();
                }
            }
        }
        report.episode_returns.push(episode_return);
        report.episode_safe.push(ended_safe);

        if (episode + 1) % cfg.eval_every == 0 && !eval_set.is_empty() {
            let (safety, shed) = evaluate_safety(&agent, env, eval_set, None)?;
            report.checkpoints.push(CheckpointStat {
                episode: episode + 1,
                safety_pct: safety,
                mean_total_shed: shed,
            });
        }
    }

    report.wall_clock_s = started.elapsed().as_secs_f64();
    Ok((agent, report))
}

/// Deterministic rollouts (ε = 0) over the unsafe set: the percentage turned
/// safe within the step budget and the mean total fraction shed.
pub fn evaluate_safety(
    agent: &SacAgent,
    env: &UflsEnv,
    unsafe_set: &[OperatingPoint],
    mut shed_profiles: Option<&mut Vec<Vec<f64>>>,
) -> Result<(f64, f64)> {
    let mut safe_count = 0usize;
    let mut total_shed = 0.0;
    for op in unsafe_set {
        let mut state = env.reset_to(op);
        let mut became_safe = false;
        while !state.done {
            let obs = env.assemble(&state);
            let (action, _, _) = agent.sample_action(&obs, None)?;
            let t = env.step(&mut state, &action)?;
            became_safe = t.constraint_c == 1;
        }
        if became_safe {
            safe_count += 1;
        }
        total_shed += state.cumulative_shed.iter().sum::<f64>();
        if let Some(profiles) = shed_profiles.as_deref_mut() {
            profiles.push(state.cumulative_shed.clone());
        }
    }
    let n = unsafe_set.len().max(1) as f64;
    Ok((100.0 * safe_count as f64 / n, total_shed / n))
}

/// A test case for the balanced-shedding analysis: an unsafe operating point
/// tagged with the buses of its binding contingency (line endpoints for
/// trips and faults, the stepped bus for load steps). Empty = untagged.
pub struct TaggedCase {
    pub op: OperatingPoint,
    pub binding_buses: Vec<usize>,
}

impl TaggedCase {
    /// Location buses of a contingency, for tagging.
    pub fn contingency_buses(net: &Network, c: &crate::dynamics::Contingency) -> Vec<usize> {
        match c.kind {
            crate::dynamics::ContingencyKind::LoadStep => vec![c.location],
            _ => {
                let line = &net.lines[c.location];
                vec![line.from_bus, line.to_bus]
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalancedShedReport {
    /// Fraction of evaluated cases where a maximal-shed bus is among the
    /// shed buses hop-nearest to the binding contingency.
    pub fraction: f64,
    pub evaluated: usize,
    pub skipped_untagged: usize,
}

/// Measure how often the deterministic policy sheds most where the binding
/// contingency is electrically nearest. Rollouts that shed nothing count as
/// failures; ties on the maximum count as success if any nearest bus attains
/// the maximum.
pub fn balanced_shedding_analysis(
    agent: &SacAgent,
    env: &UflsEnv,
    base: &Network,
    cases: &[TaggedCase],
) -> Result<BalancedShedReport> {
    let mut evaluated = 0usize;
    let mut hits = 0usize;
    let mut skipped = 0usize;
    for case in cases {
        if case.binding_buses.is_empty() {
            skipped += 1;
            continue;
        }
        let dists: Vec<Vec<usize>> =
            case.binding_buses.iter().map(|&b| base.hop_distances(b)).collect();
        let shed_dist = |bus: usize| dists.iter().map(|d| d[bus]).min().unwrap_or(usize::MAX);
        let nearest: Vec<usize> = {
            let best = env.shed_buses.iter().map(|&b| shed_dist(b)).min().unwrap_or(usize::MAX);
            (0..env.shed_buses.len())
                .filter(|&j| shed_dist(env.shed_buses[j]) == best)
                .collect()
        };

        let mut state = env.reset_to(&case.op);
        while !state.done {
            let obs = env.assemble(&state);
            let (action, _, _) = agent.sample_action(&obs, None)?;
            env.step(&mut state, &action)?;
        }
        evaluated += 1;
        let max_shed = state.cumulative_shed.iter().cloned().fold(0.0, f64::max);
        if max_shed > 0.0 {
            let attained =
                nearest.iter().any(|&j| (state.cumulative_shed[j] - max_shed).abs() < 1e-12);
            if attained {
                hits += 1;
            }
        }
    }
    Ok(BalancedShedReport {
        fraction: hits as f64 / evaluated.max(1) as f64,
        evaluated,
        skipped_untagged: skipped,
    })
}
