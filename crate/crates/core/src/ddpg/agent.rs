use serde::{Deserialize, Serialize};

use super::buffer::Batch;
use super::nets::{Actor, Critic};
use super::DdpgError;
use crate::nn::{AdamState, Matrix, Mlp, MlpGrads, NnError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.001,
            lr_actor: 1e-4,
            lr_critic: 1e-4,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup_steps: 1_000,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(("gamma", format!("must be in (0, 1], got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(("tau", format!("must be in (0, 1], got {}", self.tau)));
        }
        if !(self.lr_actor >= 0.0 && self.lr_actor.is_finite()) {
            return Err(("lr_actor", format!("must be non-negative, got {}", self.lr_actor)));
        }
        if !(self.lr_critic >= 0.0 && self.lr_critic.is_finite()) {
            return Err(("lr_critic", format!("must be non-negative, got {}", self.lr_critic)));
        }
        if self.batch_size == 0 {
            return Err(("batch_size", "must be at least 1".into()));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(("buffer_capacity", "must hold at least one batch".into()));
        }
        if self.warmup_steps > self.buffer_capacity {
            return Err(("warmup_steps", "cannot exceed buffer_capacity".into()));
        }
        Ok(())
    }
}

/// `y_i = r_i + gamma·(1 − done_i)·Q'(s'_i, μ'(s'_i))` from the target networks.
pub fn bellman_targets(
    critic_target: &Critic,
    actor_target: &Actor,
    batch: &Batch,
    gamma: f64,
) -> Result<Vec<f64>, DdpgError> {
    if batch.is_empty() {
        return Err(DdpgError::EmptyBatch);
    }
    let next_actions = actor_target.act_batch(&batch.next_states)?;
    let q_next = critic_target.q(&batch.next_states, &next_actions)?;
    Ok(batch
        .rewards
        .iter()
        .zip(&batch.dones)
        .zip(&q_next)
        .map(|((r, &done), q)| if done { *r } else { r + gamma * q })
        .collect())
}

/// Mean squared error `(1/N)Σ(Q(s_i, a_i) − y_i)²` and its parameter gradient.
pub fn critic_loss_grad(critic: &Critic, batch: &Batch, targets: &[f64]) -> Result<(f64, MlpGrads), DdpgError> {
    if batch.is_empty() {
        return Err(DdpgError::EmptyBatch);
    }
    if targets.len() != batch.len() {
        return Err(NnError::Shape(format!("{} targets for a batch of {}", targets.len(), batch.len())).into());
    }
    let n = batch.len() as f64;
    let (q, cache) = critic.net().forward_batch(&batch.states, Some(&batch.actions))?;
    let diff: Vec<f64> = q.as_slice().iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(DdpgError::Divergence(format!("critic loss is {loss}")));
    }
    let grad = Matrix::from_vec(diff.len(), 1, diff.iter().map(|d| 2.0 * d / n).collect())?;
    Ok((loss, critic.net().backward(&cache, &grad)?.grads))
}

/// One Adam step on the mean squared Bellman error. Returns the loss before
/// the step.
pub fn critic_update(
    critic: &mut Critic,
    optimizer: &mut AdamState,
    batch: &Batch,
    targets: &[f64],
) -> Result<f64, DdpgError> {
    let (loss, grads) = critic_loss_grad(critic, batch, targets)?;
    optimizer
        .step_net(critic.net_mut(), &grads)
        .map_err(|e| DdpgError::divergence("critic", e))?;
    Ok(loss)
}

/// Gradient of the batch-mean Q with respect to the actor parameters, with
/// the critic held fixed; also returns that mean Q.
pub fn policy_gradient(actor: &Actor, critic: &Critic, states: &Matrix) -> Result<(f64, MlpGrads), DdpgError> {
    let n = states.rows();
    if n == 0 {
        return Err(DdpgError::EmptyBatch);
    }
    let (actions, actor_cache) = actor.net().forward_batch(states, None)?;
    let (q, critic_cache) = critic.net().forward_batch(states, Some(&actions))?;
    let mean_q = q.as_slice().iter().sum::<f64>() / n as f64;
    let upstream = Matrix::from_vec(n, 1, vec![1.0 / n as f64; n])?;
    let dq_da = critic
        .net()
        .backward(&critic_cache, &upstream)?
        .grad_aux
        .expect("critic has an action input");
    let grads = actor.net().backward(&actor_cache, &dq_da)?.grads;
    Ok((mean_q, grads))
}

/// One Adam ascent step on the batch-mean Q through the critic's action
/// input. Returns the mean Q before the step.
pub fn actor_update(
    actor: &mut Actor,
    critic: &Critic,
    optimizer: &mut AdamState,
    batch: &Batch,
) -> Result<f64, DdpgError> {
    let (mean_q, mut grads) = policy_gradient(actor, critic, &batch.states)?;
    if !mean_q.is_finite() {
        return Err(DdpgError::Divergence(format!("mean Q is {mean_q}")));
    }
    // ascent
    grads.scale(-1.0);
    optimizer
        .step_net(actor.net_mut(), &grads)
        .map_err(|e| DdpgError::divergence("actor", e))?;
    Ok(mean_q)
}

/// `target ← tau·online + (1 − tau)·target`
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), DdpgError> {
    Ok(target.soft_update_from(online, tau)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub mean_q: f64,
}

/// Online and target networks with their optimizers.
#[derive(Clone, Debug)]
pub struct Ddpg {
    pub actor: Actor,
    pub critic: Critic,
    pub actor_target: Actor,
    pub critic_target: Critic,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub hp: Hyperparams,
    pub train_steps: u64,
}

impl Ddpg {
    /// Targets start as exact copies of the online networks.
    pub fn new(actor: Actor, critic: Critic, hp: Hyperparams) -> Result<Self, DdpgError> {
        if critic.net().input_width() != actor.obs_dim() || critic.net().aux_width() != Some(actor.action_dim()) {
            return Err(NnError::Shape("actor and critic dimensions disagree".into()).into());
        }
        Ok(Self {
            actor_opt: AdamState::for_net(actor.net(), hp.lr_actor),
            critic_opt: AdamState::for_net(critic.net(), hp.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            hp,
            train_steps: 0,
        })
    }

    /// Critic regression, policy ascent, then soft updates of both targets.
    pub fn train_step(&mut self, batch: &Batch) -> Result<TrainStats, DdpgError> {
        let y = bellman_targets(&self.critic_target, &self.actor_target, batch, self.hp.gamma)?;
        let critic_loss = critic_update(&mut self.critic, &mut self.critic_opt, batch, &y)?;
        let mean_q = actor_update(&mut self.actor, &self.critic, &mut self.actor_opt, batch)?;
        soft_update(self.critic_target.net_mut(), self.critic.net(), self.hp.tau)?;
        soft_update(self.actor_target.net_mut(), self.actor.net(), self.hp.tau)?;
        self.train_steps += 1;
        Ok(TrainStats { critic_loss, mean_q })
    }
}
