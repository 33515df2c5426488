//! Agent checkpoints: one directory holding the four networks in the binary
//! network format plus an `agent.toml` sidecar.
//!
//! ```text
//! <dir>/actor.mlpk
//! <dir>/critic.mlpk
//! <dir>/actor_target.mlpk
//! <dir>/critic_target.mlpk
//! <dir>/agent.toml    # train_steps, action_scale, [hyperparams]
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Actor, Critic, Ddpg, DdpgError, Hyperparams};
use crate::nn::{checkpoint as net_ckpt, AdamState};

pub const ACTOR: &str = "actor.mlpk";
pub const CRITIC: &str = "critic.mlpk";
pub const ACTOR_TARGET: &str = "actor_target.mlpk";
pub const CRITIC_TARGET: &str = "critic_target.mlpk";
pub const SIDECAR: &str = "agent.toml";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub train_steps: u64,
    pub action_scale: Vec<f64>,
    pub hyperparams: Hyperparams,
}

impl Sidecar {
    pub fn parse(text: &str) -> Result<Self, DdpgError> {
        toml::from_str(text).map_err(|e| DdpgError::Checkpoint(e.to_string()))
    }
}

pub fn save(agent: &Ddpg, dir: impl AsRef<Path>) -> Result<(), DdpgError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(crate::nn::NnError::from)?;
    net_ckpt::save(agent.actor.net(), dir.join(ACTOR))?;
    net_ckpt::save(agent.critic.net(), dir.join(CRITIC))?;
    net_ckpt::save(agent.actor_target.net(), dir.join(ACTOR_TARGET))?;
    net_ckpt::save(agent.critic_target.net(), dir.join(CRITIC_TARGET))?;
    let sidecar = Sidecar {
        train_steps: agent.train_steps,
        action_scale: agent.actor.scale().to_vec(),
        hyperparams: agent.hp.clone(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| DdpgError::Checkpoint(e.to_string()))?;
    fs::write(dir.join(SIDECAR), text).map_err(crate::nn::NnError::from)?;
    Ok(())
}

/// Loads only what a policy needs: the online actor and its scaling.
pub fn load_actor(dir: impl AsRef<Path>) -> Result<Actor, DdpgError> {
    let dir = dir.as_ref();
    let sidecar = read_sidecar(dir)?;
    Actor::new(net_ckpt::load(dir.join(ACTOR))?, sidecar.action_scale)
}

fn read_sidecar(dir: &Path) -> Result<Sidecar, DdpgError> {
    let text = fs::read_to_string(dir.join(SIDECAR)).map_err(crate::nn::NnError::from)?;
    Sidecar::parse(&text)
}

/// Restores all four networks; optimizer moments start fresh.
pub fn load(dir: impl AsRef<Path>) -> Result<Ddpg, DdpgError> {
    let dir = dir.as_ref();
    let sidecar = read_sidecar(dir)?;
    let actor = Actor::new(net_ckpt::load(dir.join(ACTOR))?, sidecar.action_scale.clone())?;
    let critic = Critic::new(net_ckpt::load(dir.join(CRITIC))?)?;
    let actor_target = Actor::new(net_ckpt::load(dir.join(ACTOR_TARGET))?, sidecar.action_scale)?;
    let critic_target = Critic::new(net_ckpt::load(dir.join(CRITIC_TARGET))?)?;
    actor.net().check_same_shape(actor_target.net())?;
    critic.net().check_same_shape(critic_target.net())?;
    let mut agent = Ddpg::new(actor, critic, sidecar.hyperparams)?;
    agent.actor_target = actor_target;
    agent.critic_target = critic_target;
    agent.actor_opt = AdamState::for_net(agent.actor.net(), agent.hp.lr_actor);
    agent.critic_opt = AdamState::for_net(agent.critic.net(), agent.hp.lr_critic);
    agent.train_steps = sidecar.train_steps;
    Ok(agent)
}
