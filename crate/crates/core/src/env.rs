//! The episodic environment interface shared by the simulators and the
//! training runner.

use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("episode already finished; reset first")]
    EpisodeFinished,
    #[error("episode not started; reset first")]
    NotStarted,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("infeasible world: {0}")]
    Infeasible(String),
}

/// Outcome of one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// true terminal state: no bootstrapping past it
    pub terminal: bool,
    /// episode cut by a time limit
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;

    fn action_dim(&self) -> usize;

    /// Starts a new episode and returns the first observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EnvError>;

    /// Applies an action in physical units.
    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError>;
}
