//! SAC learner invariants: target lag, twin-minimum selection, gradient
//! correctness of both losses, determinism, and evaluation-mode behavior.

use gridshed_core::rng::substream;
use gridshed_core::sac::{
    ema_update, standard_normal, ReplayBuffer, SacAgent, SacConfig, StoredTransition,
};
use gridshed_core::tensor::Tensor;
use rand::Rng;

fn tiny_agent(seed: u64) -> SacAgent {
    SacAgent::new(
        4,
        2,
        SacConfig {
            hidden: 8,
            seed,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            alpha: 0.2,
            lambda: 2.0,
            batch_size: 4,
            ..Default::default()
        },
    )
}

fn random_transition(rng: &mut rand_chacha::ChaCha12Rng, done: bool) -> StoredTransition {
    StoredTransition {
        state: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        action: (0..2).map(|_| rng.gen_range(-0.99..0.99)).collect(),
        reward: rng.gen_range(-0.2..0.0),
        constraint_c: rng.gen_range(0..2),
        next_state: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        done,
    }
}

#[test]
fn target_norm_decays_as_one_minus_tau_power() {
    let agent = tiny_agent(1);
    let tau = 0.25;
    let mut target = agent.target1.params.clone();
    // push the target away from the critic first
    for p in &mut target {
        for w in &mut p.weights {
            *w += 1.0;
        }
    }
    let norm = |a: &[gridshed_core::tensor::LayerParams],
                b: &[gridshed_core::tensor::LayerParams]| {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            for (xv, yv) in x.weights.iter().zip(&y.weights) {
                s += (xv - yv).powi(2);
            }
            for (xv, yv) in x.biases.iter().zip(&y.biases) {
                s += (xv - yv).powi(2);
            }
        }
        s.sqrt()
    };
    let initial = norm(&target, &agent.critic1.params);
    for n in 1..=10 {
        ema_update(&mut target, &agent.critic1.params, tau);
        let bound = (1.0 - tau).powi(n) * initial;
        let d = norm(&target, &agent.critic1.params);
        assert!(d <= bound + 1e-9, "after {n} updates: {d} > {bound}");
    }
}

#[test]
fn bellman_target_uses_elementwise_minimum_of_targets() {
    let mut agent = tiny_agent(2);
    // constant-output targets: zero everything, then set output biases
    for net in [&mut agent.target1, &mut agent.target2] {
        for p in &mut net.params {
            for w in &mut p.weights {
                *w = 0.0;
            }
            for b in &mut p.biases {
                *b = 0.0;
            }
        }
    }
    let n_layers = agent.target1.params.len();
    agent.target1.params[n_layers - 1].biases[0] = 3.0;
    agent.target2.params[n_layers - 1].biases[0] = 7.0;
    // α = 0 isolates the min(Q̄) term
    agent.cfg.alpha = 0.0;
    agent.cfg.lambda = 0.0;
    agent.cfg.gamma = 0.5;

    let mut rng = substream(3, "twin", 0);
    let t = StoredTransition {
        state: vec![0.1; 4],
        action: vec![0.0; 2],
        reward: -0.05,
        constraint_c: 0,
        next_state: vec![0.2; 4],
        done: false,
    };
    let targets = agent.critic_targets(&[&t], &mut rng).unwrap();
    // y = r + γ·min(3, 7) = −0.05 + 0.5·3
    assert!((targets[0] - 1.45).abs() < 1e-12, "target {}", targets[0]);

    let terminal = StoredTransition { done: true, ..t };
    let targets = agent.critic_targets(&[&terminal], &mut rng).unwrap();
    assert_eq!(targets[0], -0.05);
}

#[test]
fn terminal_transition_with_bonus_is_plain_reward() {
    let mut agent = tiny_agent(4);
    agent.cfg.lambda = 10.0;
    let mut rng = substream(4, "terminal", 0);
    let t = StoredTransition {
        state: vec![0.0; 4],
        action: vec![0.0; 2],
        reward: -0.15,
        constraint_c: 1,
        next_state: vec![0.0; 4],
        done: true,
    };
    let targets = agent.critic_targets(&[&t], &mut rng).unwrap();
    assert!((targets[0] - 9.85).abs() < 1e-12);
}

#[test]
fn critic_loss_gradients_match_finite_differences() {
    let mut rng = substream(5, "critic-fd", 0);
    for trial in 0..20 {
        let mut agent = tiny_agent(100 + trial);
        let batch: Vec<StoredTransition> =
            (0..4).map(|i| random_transition(&mut rng, i % 2 == 0)).collect();
        let refs: Vec<&StoredTransition> = batch.iter().collect();
        let inputs = agent.critic_inputs(&refs);
        let targets: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grads) = agent.critic_gradients(0, &inputs, &targets).unwrap();

        let h = 1e-5;
        for layer in 0..agent.critic1.params.len() {
            for i in 0..agent.critic1.params[layer].weights.len().min(6) {
                let orig = agent.critic1.params[layer].weights[i];
                agent.critic1.params[layer].weights[i] = orig + h;
                let fp = agent.critic_loss(0, &inputs, &targets).unwrap();
                agent.critic1.params[layer].weights[i] = orig - h;
                let fm = agent.critic_loss(0, &inputs, &targets).unwrap();
                agent.critic1.params[layer].weights[i] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let analytic = grads[layer].weights[i];
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((analytic - fd) / denom).abs() < 1e-4,
                    "layer {layer} w{i}: {analytic:.6e} vs {fd:.6e}"
                );
            }
        }
    }
}

#[test]
fn actor_loss_gradients_match_finite_differences() {
    let mut rng = substream(6, "actor-fd", 0);
    for trial in 0..20 {
        let mut agent = tiny_agent(200 + trial);
        let b = 3;
        let states = Tensor::new(
            vec![b, 4],
            (0..b * 4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let eps: Vec<f64> = (0..b * 2).map(|_| standard_normal(&mut rng)).collect();
        let (_, grads) = agent.actor_gradients(&states, &eps).unwrap();

        let h = 1e-5;
        for layer in 0..agent.actor.params.len() {
            for i in 0..agent.actor.params[layer].weights.len().min(6) {
                let orig = agent.actor.params[layer].weights[i];
                agent.actor.params[layer].weights[i] = orig + h;
                let fp = agent.actor_loss(&states, &eps).unwrap();
                agent.actor.params[layer].weights[i] = orig - h;
                let fm = agent.actor_loss(&states, &eps).unwrap();
                agent.actor.params[layer].weights[i] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let analytic = grads[layer].weights[i];
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((analytic - fd) / denom).abs() < 1e-4,
                    "trial {trial} layer {layer} w{i}: {analytic:.6e} vs {fd:.6e}"
                );
            }
        }
    }
}

#[test]
fn entropy_pressure_raises_log_std_under_constant_critics() {
    // constant critics make the Q term flat; with α > 0 the gradient must
    // push log_std up (entropy increases)
    let mut agent = tiny_agent(7);
    for net in [&mut agent.critic1, &mut agent.critic2] {
        for p in &mut net.params {
            for w in &mut p.weights {
                *w = 0.0;
            }
            for b in &mut p.biases {
                *b = 0.0;
            }
        }
    }
    agent.cfg.alpha = 0.5;
    let mut rng = substream(7, "entropy", 0);
    let states = Tensor::new(vec![4, 4], (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());

    let mean_log_std = |agent: &SacAgent| -> f64 {
        let mut total = 0.0;
        for bi in 0..4 {
            let s = &states.data[bi * 4..(bi + 1) * 4];
            let x = Tensor::new(vec![1, 4], s.to_vec());
            let out = agent.actor.forward(&x).unwrap().output().data.clone();
            total += (out[2] + out[3]) / 2.0; // log_std head
        }
        total / 4.0
    };

    let before = mean_log_std(&agent);
    let mut buffer = ReplayBuffer::new(16);
    for _ in 0..8 {
        buffer.push(random_transition(&mut rng, false));
    }
    for _ in 0..200 {
        let idx = buffer.sample_indices(&mut rng, 4);
        agent.actor_update(&buffer, &idx, &mut rng).unwrap();
    }
    let after = mean_log_std(&agent);
    assert!(after > before, "log_std did not increase: {before} -> {after}");
}

#[test]
fn evaluation_actions_are_invariant_to_critic_scaling() {
    let agent = tiny_agent(8);
    let state: Vec<f64> = vec![0.3, -0.2, 0.8, 0.1];
    let (a1, c1, _) = agent.sample_action(&state, None).unwrap();

    let mut scaled = tiny_agent(8);
    for net in [&mut scaled.critic1, &mut scaled.critic2] {
        for p in &mut net.params {
            for w in &mut p.weights {
                *w *= 3.0;
            }
            for b in &mut p.biases {
                *b *= 3.0;
            }
        }
    }
    let (a2, c2, _) = scaled.sample_action(&state, None).unwrap();
    assert_eq!(a1.flags, a2.flags);
    assert_eq!(c1, c2);
}

#[test]
fn deterministic_mode_thresholds_by_mean_sign() {
    let mut agent = tiny_agent(9);
    // force the actor output: zero weights, fixed biases on the output layer
    for p in &mut agent.actor.params {
        for w in &mut p.weights {
            *w = 0.0;
        }
        for b in &mut p.biases {
            *b = 0.0;
        }
    }
    let last = agent.actor.params.len() - 1;
    agent.actor.params[last].biases = vec![2.0, -2.0, 0.0, 0.0]; // means ±2
    let (action, cont, _) = agent.sample_action(&[0.0; 4], None).unwrap();
    assert_eq!(action.flags, vec![true, false]);
    assert!(cont[0] > 0.9 && cont[1] < -0.9);
}
