//! Run configuration file: TOML with one table per component. Every key is
//! optional and unknown keys are rejected.
//!
//! ```toml
//! [episode]
//! v_max = 0.5
//!
//! [network]
//! actor_hidden = [512, 512, 512]
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddpg::{Actor, Critic, Ddpg, DdpgError, Hyperparams};
use crate::gp::GpConfig;
use crate::runner::{NoiseConfig, RunConfig};
use crate::sim::{EpisodeConfig, LidarSpec, RewardConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("config key {path}: {msg}")]
    Key { path: String, msg: String },
    #[error("config value {key} {msg}")]
    Range { key: String, msg: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// hidden layer index where the action joins the critic
    pub critic_merge_layer: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![512, 512, 512],
            critic_hidden: vec![512, 512, 512],
            critic_merge_layer: 1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.actor_hidden.is_empty() || self.actor_hidden.contains(&0) {
            return Err(("actor_hidden", "needs at least one layer, all widths positive".into()));
        }
        if self.critic_hidden.is_empty() || self.critic_hidden.contains(&0) {
            return Err(("critic_hidden", "needs at least one layer, all widths positive".into()));
        }
        if self.critic_merge_layer > self.critic_hidden.len() {
            return Err((
                "critic_merge_layer",
                format!("must be at most {}, got {}", self.critic_hidden.len(), self.critic_merge_layer),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub reward: RewardConfig,
    pub agent: Hyperparams,
    pub run: RunConfig,
    pub episode: EpisodeConfig,
    pub lidar: LidarSpec,
    pub gp: GpConfig,
    pub noise: NoiseConfig,
    pub network: NetworkConfig,
}

fn range(section: &str, (key, msg): (&str, String)) -> ConfigError {
    ConfigError::Range {
        key: format!("{section}.{key}"),
        msg,
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Key {
            path: e.path().to_string(),
            msg: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lidar.validate().map_err(|e| range("lidar", e))?;
        self.reward.validate(self.lidar.min_range).map_err(|e| range("reward", e))?;
        self.episode.validate().map_err(|e| range("episode", e))?;
        self.agent.validate().map_err(|e| range("agent", e))?;
        self.run.validate().map_err(|e| range("run", e))?;
        self.noise.validate().map_err(|e| range("noise", e))?;
        self.gp.validate().map_err(|e| range("gp", e))?;
        self.network.validate().map_err(|e| range("network", e))?;
        Ok(())
    }

    /// Every key with its resolved value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are plain numbers, strings and arrays")
    }

    pub fn obs_dim(&self) -> usize {
        self.lidar.n_beams + 4
    }

    /// Fresh navigation agent with the configured networks, initialized
    /// from `seed`.
    pub fn nav_agent(&self, seed: u64) -> Result<Ddpg, DdpgError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = self.obs_dim();
        let actor = Actor::navigation(obs, &self.network.actor_hidden, self.episode.v_max, self.episode.w_max, &mut rng)?;
        let critic = Critic::init(obs, 2, &self.network.critic_hidden, self.network.critic_merge_layer, &mut rng)?;
        Ddpg::new(actor, critic, self.agent.clone())
    }
}
