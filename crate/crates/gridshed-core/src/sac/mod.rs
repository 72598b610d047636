//! Soft actor-critic for under-frequency load shedding: twin critics with
//! EMA targets, a squashed-Gaussian actor thresholded into binary shed
//! flags, a ring replay buffer, and the training/evaluation loops.

mod agent;
mod replay;
mod train;

pub use agent::{ema_update, standard_normal, SacAgent, SacConfig, LOG_STD_MAX, LOG_STD_MIN};
pub use replay::{ReplayBuffer, StoredTransition};
pub use train::{
    balanced_shedding_analysis, evaluate_safety, train, BalancedShedReport, CheckpointStat,
    TaggedCase, TrainReport,
};

use crate::error::Result;
use crate::tensor::{load_checkpoint, save_checkpoint, Checkpoint};

/// Save the actor and both critics as one checkpoint family under `stem`.
pub fn save_agent(stem: impl AsRef<std::path::Path>, agent: &SacAgent) -> Result<()> {
    let stem = stem.as_ref();
    let meta = |net: &crate::tensor::FeedForward, role: &str| {
        let mut extra = serde_json::Map::new();
        extra.insert("role".into(), role.into());
        extra.insert("state_dim".into(), (agent.state_dim as u64).into());
        extra.insert("n_actions".into(), (agent.n_actions as u64).into());
        extra.insert("sac_config".into(), serde_json::to_value(agent.cfg).unwrap());
        Checkpoint {
            architecture: net.specs.clone(),
            seed: agent.cfg.seed,
            step_count: agent.actor_adam.step_count,
            extra,
        }
    };
    save_checkpoint(stem.with_extension("actor"), &agent.actor, &meta(&agent.actor, "actor"))?;
    save_checkpoint(stem.with_extension("critic1"), &agent.critic1, &meta(&agent.critic1, "critic1"))?;
    save_checkpoint(stem.with_extension("critic2"), &agent.critic2, &meta(&agent.critic2, "critic2"))?;
    Ok(())
}

/// Load an agent saved by [`save_agent`] (targets initialized to the critics).
pub fn load_agent(stem: impl AsRef<std::path::Path>) -> Result<SacAgent> {
    let stem = stem.as_ref();
    let (actor, meta) = load_checkpoint(stem.with_extension("actor"))?;
    let (critic1, _) = load_checkpoint(stem.with_extension("critic1"))?;
    let (critic2, _) = load_checkpoint(stem.with_extension("critic2"))?;
    let cfg: SacConfig = serde_json::from_value(
        meta.extra
            .get("sac_config")
            .cloned()
            .ok_or_else(|| crate::error::Error::InvalidInput("agent checkpoint missing config".into()))?,
    )?;
    let state_dim = meta.extra.get("state_dim").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    let n_actions = meta.extra.get("n_actions").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    let mut agent = SacAgent::new(state_dim, n_actions, cfg);
    agent.target1 = critic1.clone();
    agent.target2 = critic2.clone();
    agent.actor = actor;
    agent.critic1 = critic1;
    agent.critic2 = critic2;
    Ok(agent)
}
