//! Actor-critic agent: networks, replay, exploration noise and updates.

mod agent;
mod buffer;
pub mod checkpoint;
mod nets;
mod noise;

pub use agent::{
    actor_update, bellman_targets, critic_loss_grad, critic_update, policy_gradient, soft_update, Ddpg, Hyperparams, TrainStats,
};
pub use buffer::{Batch, NotReady, ReplayBuffer, Transition};
pub use nets::{Actor, ActorOutput, Critic, CLIP_MARGIN};
pub use noise::OuNoise;

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum DdpgError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid agent checkpoint: {0}")]
    Checkpoint(String),
}

impl DdpgError {
    fn divergence(which: &str, e: NnError) -> Self {
        match e {
            NnError::NonFinite(what) => DdpgError::Divergence(format!("{which} {what} is not finite")),
            other => other.into(),
        }
    }
}
