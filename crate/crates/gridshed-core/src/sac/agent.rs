//! Soft actor-critic learner: squashed-Gaussian actor, twin critics with
//! EMA targets, and the gradient updates of both.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::env::Action;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tensor::{
    adam_step, gaussian_tanh_grads, gaussian_tanh_sample, AdamState, FeedForward, LayerParams,
    LayerSpec, SquashSample, Tensor,
};

use super::replay::{ReplayBuffer, StoredTransition};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SacConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Entropy temperature α (fixed; automatic tuning intentionally absent).
    pub alpha: f64,
    /// Constraint weight λ in r_λ = r + λ·c.
    pub lambda: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub hidden: usize,
    /// Uniform-random environment steps before the policy takes over.
    pub start_steps: usize,
    pub updates_per_step: usize,
    pub episodes: usize,
    /// Evaluate on the fixed unsafe set every this many episodes.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            // paper-reported learning rates; desk-scale runs override them
            actor_lr: 1e-7,
            critic_lr: 1e-6,
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.2,
            lambda: 0.0,
            batch_size: 64,
            replay_capacity: 100_000,
            hidden: 128,
            start_steps: 200,
            updates_per_step: 1,
            episodes: 10_000,
            eval_every: 100,
            seed: 0,
        }
    }
}

/// Actor, twin critics, their EMA targets, and optimizer states.
pub struct SacAgent {
    pub actor: FeedForward,
    pub critic1: FeedForward,
    pub critic2: FeedForward,
    pub target1: FeedForward,
    pub target2: FeedForward,
    pub actor_adam: AdamState,
    pub critic1_adam: AdamState,
    pub critic2_adam: AdamState,
    pub cfg: SacConfig,
    pub state_dim: usize,
    pub n_actions: usize,
}

fn dense_stack(inputs: usize, hidden: usize, outputs: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { inputs, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs },
    ]
}

impl SacAgent {
    pub fn new(state_dim: usize, n_actions: usize, cfg: SacConfig) -> Self {
        let actor = FeedForward::init(
            dense_stack(state_dim, cfg.hidden, 2 * n_actions),
            &mut substream(cfg.seed, "sac-actor-init", 0),
        );
        let critic1 = FeedForward::init(
            dense_stack(state_dim + n_actions, cfg.hidden, 1),
            &mut substream(cfg.seed, "sac-critic-init", 1),
        );
        let critic2 = FeedForward::init(
            dense_stack(state_dim + n_actions, cfg.hidden, 1),
            &mut substream(cfg.seed, "sac-critic-init", 2),
        );
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        SacAgent {
            actor_adam: AdamState::new(&actor.params, cfg.actor_lr),
            critic1_adam: AdamState::new(&critic1.params, cfg.critic_lr),
            critic2_adam: AdamState::new(&critic2.params, cfg.critic_lr),
            actor,
            critic1,
            critic2,
            target1,
            target2,
            cfg,
            state_dim,
            n_actions,
        }
    }

    /// Actor heads for a batch of states: (means, clamped log-stds).
    fn policy_raw(&self, states: &Tensor) -> Result<(Vec<f64>, Vec<f64>, crate::tensor::Cache)> {
        let cache = self.actor.forward(states)?;
        let out = cache.output();
        let b = states.batch();
        let n = self.n_actions;
        let mut means = Vec::with_capacity(b * n);
        let mut log_stds = Vec::with_capacity(b * n);
        for bi in 0..b {
            let row = &out.data[bi * 2 * n..(bi + 1) * 2 * n];
            means.extend_from_slice(&row[..n]);
            log_stds.extend(row[n..].iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)));
        }
        Ok((means, log_stds, cache))
    }

    /// Sample an action for one state. `noise` of None means deterministic
    /// evaluation mode (ε = 0). Returns the binary action, the continuous
    /// pre-threshold action, and its log-probability.
    pub fn sample_action(
        &self,
        state: &[f64],
        noise: Option<&mut ChaCha12Rng>,
    ) -> Result<(Action, Vec<f64>, f64)> {
        let x = Tensor::new(vec![1, self.state_dim], state.to_vec());
        let (means, log_stds, _) = self.policy_raw(&x)?;
        let eps: Vec<f64> = match noise {
            Some(rng) => (0..self.n_actions).map(|_| standard_normal(rng)).collect(),
            None => vec![0.0; self.n_actions],
        };
        let s = gaussian_tanh_sample(&means, &log_stds, &eps);
        let flags = s.action.iter().map(|&a| a > 0.0).collect();
        Ok((Action { flags }, s.action, s.log_prob))
    }

    /// Soft Bellman targets y = r_λ + γ(min Q̄(s', a') − α log π(a'|s')) with
    /// fresh next actions from the current policy (no bootstrap on terminal
    /// transitions).
    pub fn critic_targets(
        &self,
        batch: &[&StoredTransition],
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<f64>> {
        let b = batch.len();
        let (sd, na) = (self.state_dim, self.n_actions);
        let next_states = Tensor::new(
            vec![b, sd],
            batch.iter().flat_map(|t| t.next_state.iter().copied()).collect(),
        );
        let (means, log_stds, _) = self.policy_raw(&next_states)?;
        let eps: Vec<f64> = (0..b * na).map(|_| standard_normal(rng)).collect();
        let mut next_actions = Vec::with_capacity(b * na);
        let mut next_logp = Vec::with_capacity(b);
        for bi in 0..b {
            let r = bi * na..(bi + 1) * na;
            let s = gaussian_tanh_sample(&means[r.clone()], &log_stds[r.clone()], &eps[r]);
            next_actions.extend_from_slice(&s.action);
            next_logp.push(s.log_prob);
        }

        let next_in = concat_state_action(
            batch.iter().map(|t| t.next_state.as_slice()),
            &next_actions,
            b,
            sd,
            na,
        );
        let q1t = self.target1.forward(&next_in)?.output().data.clone();
        let q2t = self.target2.forward(&next_in)?.output().data.clone();

        let mut targets = Vec::with_capacity(b);
        for bi in 0..b {
            let r_lambda = crate::env::combined_reward(
                batch[bi].reward,
                batch[bi].constraint_c,
                self.cfg.lambda,
            );
            let y = if batch[bi].done {
                r_lambda
            } else {
                let q_min = q1t[bi].min(q2t[bi]);
                r_lambda + self.cfg.gamma * (q_min - self.cfg.alpha * next_logp[bi])
            };
            targets.push(y);
        }
        Ok(targets)
    }

    /// Mean squared soft Bellman residual ½(Q − y)² of one critic on a
    /// prepared (state ∥ action) batch.
    pub fn critic_loss(&self, which: usize, inputs: &Tensor, targets: &[f64]) -> Result<f64> {
        let critic = if which == 0 { &self.critic1 } else { &self.critic2 };
        let cache = critic.forward(inputs)?;
        let q = &cache.output().data;
        let b = targets.len() as f64;
        Ok(q.iter().zip(targets).map(|(q, y)| 0.5 * (q - y) * (q - y)).sum::<f64>() / b)
    }

    /// Loss and parameter gradients of one critic.
    pub fn critic_gradients(
        &self,
        which: usize,
        inputs: &Tensor,
        targets: &[f64],
    ) -> Result<(f64, Vec<LayerParams>)> {
        let critic = if which == 0 { &self.critic1 } else { &self.critic2 };
        let b = targets.len();
        let cache = critic.forward(inputs)?;
        let q = &cache.output().data;
        let mut upstream = vec![0.0; b];
        let mut loss = 0.0;
        for bi in 0..b {
            let err = q[bi] - targets[bi];
            loss += 0.5 * err * err;
            upstream[bi] = err / b as f64;
        }
        loss /= b as f64;
        let (grads, _) = critic.backward(&cache, &Tensor::new(vec![b, 1], upstream))?;
        Ok((loss, grads))
    }

    /// Assemble the (state ∥ stored action) batch tensor for critic fitting.
    pub fn critic_inputs(&self, batch: &[&StoredTransition]) -> Tensor {
        concat_state_action(
            batch.iter().map(|t| t.state.as_slice()),
            &batch.iter().flat_map(|t| t.action.iter().copied()).collect::<Vec<_>>(),
            batch.len(),
            self.state_dim,
            self.n_actions,
        )
    }

    /// One twin-critic gradient step. Returns both losses.
    pub fn critic_update(
        &mut self,
        buffer: &ReplayBuffer,
        indices: &[usize],
        rng: &mut ChaCha12Rng,
    ) -> Result<(f64, f64)> {
        let batch: Vec<&StoredTransition> = indices.iter().map(|&i| buffer.get(i)).collect();
        let targets = self.critic_targets(&batch, rng)?;
        let inputs = self.critic_inputs(&batch);
        let step_count = self.critic1_adam.step_count as usize;
        let mut losses = [0.0; 2];
        for which in 0..2 {
            let (loss, grads) = self.critic_gradients(which, &inputs, &targets)?;
            if !loss.is_finite() {
                return Err(Error::TrainDiverged { epoch: step_count });
            }
            losses[which] = loss;
            if which == 0 {
                adam_step(&mut self.critic1_adam, &mut self.critic1.params, &grads);
            } else {
                adam_step(&mut self.critic2_adam, &mut self.critic2.params, &grads);
            }
        }
        Ok((losses[0], losses[1]))
    }

    /// Actor objective E[α log π(a|s) − min Q(s, a)] at fixed noise.
    pub fn actor_loss(&self, states: &Tensor, eps: &[f64]) -> Result<f64> {
        let b = states.batch();
        let (sd, na) = (self.state_dim, self.n_actions);
        let (means, log_stds, _) = self.policy_raw(states)?;
        let mut actions = Vec::with_capacity(b * na);
        let mut logps = Vec::with_capacity(b);
        for bi in 0..b {
            let r = bi * na..(bi + 1) * na;
            let s = gaussian_tanh_sample(&means[r.clone()], &log_stds[r.clone()], &eps[r]);
            actions.extend_from_slice(&s.action);
            logps.push(s.log_prob);
        }
        let state_rows: Vec<&[f64]> =
            (0..b).map(|bi| &states.data[bi * sd..(bi + 1) * sd]).collect();
        let q_in = concat_state_action(state_rows.into_iter(), &actions, b, sd, na);
        let q1 = self.critic1.forward(&q_in)?.output().data.clone();
        let q2 = self.critic2.forward(&q_in)?.output().data.clone();
        let mut loss = 0.0;
        for bi in 0..b {
            loss += self.cfg.alpha * logps[bi] - q1[bi].min(q2[bi]);
        }
        Ok(loss / b as f64)
    }

    /// Loss and actor parameter gradients at fixed noise; critic parameters
    /// receive no update (their gradients are discarded).
    pub fn actor_gradients(
        &self,
        states: &Tensor,
        eps: &[f64],
    ) -> Result<(f64, Vec<LayerParams>)> {
        let b = states.batch();
        let (sd, na) = (self.state_dim, self.n_actions);
        let (means, log_stds, actor_cache) = self.policy_raw(states)?;
        let mut samples: Vec<SquashSample> = Vec::with_capacity(b);
        let mut actions = Vec::with_capacity(b * na);
        for bi in 0..b {
            let r = bi * na..(bi + 1) * na;
            let s = gaussian_tanh_sample(&means[r.clone()], &log_stds[r.clone()], &eps[r]);
            actions.extend_from_slice(&s.action);
            samples.push(s);
        }

        let state_rows: Vec<&[f64]> =
            (0..b).map(|bi| &states.data[bi * sd..(bi + 1) * sd]).collect();
        let q_in = concat_state_action(state_rows.into_iter(), &actions, b, sd, na);
        let c1 = self.critic1.forward(&q_in)?;
        let c2 = self.critic2.forward(&q_in)?;
        let q1 = &c1.output().data;
        let q2 = &c2.output().data;

        // route −1/B through whichever critic attains the minimum, then read
        // the gradient with respect to the action slice
        let mut up1 = vec![0.0; b];
        let mut up2 = vec![0.0; b];
        let mut loss = 0.0;
        for bi in 0..b {
            let (q_min, first) = if q1[bi] <= q2[bi] { (q1[bi], true) } else { (q2[bi], false) };
            loss += self.cfg.alpha * samples[bi].log_prob - q_min;
            if first {
                up1[bi] = -1.0 / b as f64;
            } else {
                up2[bi] = -1.0 / b as f64;
            }
        }
        loss /= b as f64;
        let (_, gin1) = self.critic1.backward(&c1, &Tensor::new(vec![b, 1], up1))?;
        let (_, gin2) = self.critic2.backward(&c2, &Tensor::new(vec![b, 1], up2))?;

        // upstream for the actor outputs: [dL/dμ | dL/dlogσ] per sample
        let mut upstream = vec![0.0; b * 2 * na];
        let inv_b = 1.0 / b as f64;
        for bi in 0..b {
            let r = bi * na..(bi + 1) * na;
            let g = gaussian_tanh_grads(&log_stds[r.clone()], &eps[r.clone()], &samples[bi]);
            for j in 0..na {
                let da = gin1.data[bi * (sd + na) + sd + j] + gin2.data[bi * (sd + na) + sd + j];
                // da already carries −1/B from the upstream routing
                let dmean = inv_b * self.cfg.alpha * g.dlogp_dmean[j] + da * g.da_dmean[j];
                let mut dlogstd =
                    inv_b * self.cfg.alpha * g.dlogp_dlogstd[j] + da * g.da_dlogstd[j];
                let raw = log_stds[bi * na + j];
                if raw <= LOG_STD_MIN || raw >= LOG_STD_MAX {
                    dlogstd = 0.0; // clamped head
                }
                upstream[bi * 2 * na + j] = dmean;
                upstream[bi * 2 * na + na + j] = dlogstd;
            }
        }
        let up = Tensor::new(vec![b, 2 * na], upstream);
        let (grads, _) = self.actor.backward(&actor_cache, &up)?;
        Ok((loss, grads))
    }

    /// One actor gradient step on E[α log π(a|s) − min Q(s, a)] with fresh
    /// reparameterization noise; critics stay frozen.
    pub fn actor_update(
        &mut self,
        buffer: &ReplayBuffer,
        indices: &[usize],
        rng: &mut ChaCha12Rng,
    ) -> Result<f64> {
        let batch: Vec<&StoredTransition> = indices.iter().map(|&i| buffer.get(i)).collect();
        let b = batch.len();
        let states = Tensor::new(
            vec![b, self.state_dim],
            batch.iter().flat_map(|t| t.state.iter().copied()).collect(),
        );
        let eps: Vec<f64> =
            (0..b * self.n_actions).map(|_| standard_normal(rng)).collect();
        let (loss, grads) = self.actor_gradients(&states, &eps)?;
        if !loss.is_finite() {
            return Err(Error::TrainDiverged { epoch: self.actor_adam.step_count as usize });
        }
        adam_step(&mut self.actor_adam, &mut self.actor.params, &grads);
        Ok(loss)
    }

    /// θ̄ ← τ θ + (1 − τ) θ̄ for both targets.
    pub fn target_update(&mut self) {
        ema_update(&mut self.target1.params, &self.critic1.params, self.cfg.tau);
        ema_update(&mut self.target2.params, &self.critic2.params, self.cfg.tau);
    }
}

/// Elementwise convex combination of parameter sets.
pub fn ema_update(target: &mut [LayerParams], source: &[LayerParams], tau: f64) {
    for (t, s) in target.iter_mut().zip(source) {
        for (tv, sv) in t.weights.iter_mut().zip(&s.weights) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
        for (tv, sv) in t.biases.iter_mut().zip(&s.biases) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
    }
}

fn concat_state_action<'a>(
    states: impl Iterator<Item = &'a [f64]>,
    actions: &[f64],
    b: usize,
    sd: usize,
    na: usize,
) -> Tensor {
    let mut data = Vec::with_capacity(b * (sd + na));
    for (bi, s) in states.enumerate() {
        data.extend_from_slice(s);
        data.extend_from_slice(&actions[bi * na..(bi + 1) * na]);
    }
    Tensor::new(vec![b, sd + na], data)
}

/// Box-Muller standard normal draw.
pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
