use rand::Rng;

use super::DdpgError;
use crate::nn::{Activation, Activations, Matrix, Mlp, MlpShape, NnError};

/// Margin kept from the open output bounds when clipping noisy actions.
pub const CLIP_MARGIN: f64 = 1e-6;

/// Deterministic policy: a network whose output layer is bounded per unit,
/// plus per-unit scale factors mapping raw outputs to physical commands.
#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    net: Mlp,
    scale: Vec<f64>,
}

/// Raw network output and the command sent to the robot.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorOutput {
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
}

impl Actor {
    pub fn new(net: Mlp, scale: Vec<f64>) -> Result<Self, DdpgError> {
        if net.aux_width().is_some() {
            return Err(NnError::Shape("actor network cannot take an auxiliary input".into()).into());
        }
        if scale.len() != net.output_width() {
            return Err(NnError::Shape(format!(
                "{} scale factors for {} outputs",
                scale.len(),
                net.output_width()
            ))
            .into());
        }
        let head = &net.layers()[net.layers().len() - 1].activation;
        if (0..net.output_width()).any(|j| head.get(j).range().is_none()) {
            return Err(NnError::Shape("actor output units must be tanh or sigmoid".into()).into());
        }
        Ok(Self { net, scale })
    }

    /// Velocity planner: sigmoid linear-velocity unit and tanh angular unit,
    /// scaled by `(v_max, w_max)`.
    pub fn navigation(
        obs_dim: usize,
        hidden: &[usize],
        v_max: f64,
        w_max: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, DdpgError> {
        let shape = MlpShape::new(
            obs_dim,
            hidden,
            Activation::Relu,
            2,
            Activations::PerUnit(vec![Activation::Sigmoid, Activation::Tanh]),
        );
        Self::new(Mlp::init(&shape, rng)?, vec![v_max, w_max])
    }

    /// Symmetric tanh head scaled by `bound` on every unit.
    pub fn symmetric(
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        bound: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, DdpgError> {
        let shape = MlpShape::new(obs_dim, hidden, Activation::Relu, action_dim, Activation::Tanh);
        Self::new(Mlp::init(&shape, rng)?, vec![bound; action_dim])
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_width()
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_width()
    }

    /// Open interval of each raw output unit.
    pub fn raw_bounds(&self) -> Vec<(f64, f64)> {
        let head = &self.net.layers()[self.net.layers().len() - 1].activation;
        (0..self.action_dim())
            .map(|j| head.get(j).range().expect("validated bounded head"))
            .collect()
    }

    pub fn scale_action(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.scale).map(|(a, k)| a * k).collect()
    }

    /// Policy output for one observation. Noise, when given, is added in raw
    /// space and the result clipped back inside the output bounds.
    pub fn act(&self, obs: &[f64], noise: Option<&[f64]>) -> Result<ActorOutput, DdpgError> {
        let mut raw = self.net.predict(obs, None)?;
        if let Some(n) = noise {
            if n.len() != raw.len() {
                return Err(NnError::Shape(format!("noise of width {} for {} actions", n.len(), raw.len())).into());
            }
            for ((a, e), (lo, hi)) in raw.iter_mut().zip(n).zip(self.raw_bounds()) {
                *a = (*a + e).clamp(lo + CLIP_MARGIN, hi - CLIP_MARGIN);
            }
        }
        let scaled = self.scale_action(&raw);
        Ok(ActorOutput { raw, scaled })
    }

    pub fn act_batch(&self, obs: &Matrix) -> Result<Matrix, DdpgError> {
        Ok(self.net.predict_batch(obs, None)?)
    }
}

/// Q-network: state enters at the bottom, the raw action joins at the
/// merge layer, and a linear unit produces the value.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    net: Mlp,
}

impl Critic {
    pub fn new(net: Mlp) -> Result<Self, DdpgError> {
        if net.aux_width().is_none() || net.output_width() != 1 {
            return Err(NnError::Shape("critic needs an action merge and a single output".into()).into());
        }
        Ok(Self { net })
    }

    /// `hidden` widths with the action concatenated onto the input of
    /// layer `merge_layer` (0 = alongside the state).
    pub fn init(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        merge_layer: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, DdpgError> {
        let shape = MlpShape::new(obs_dim, hidden, Activation::Relu, 1, Activation::Linear)
            .with_merge(merge_layer, action_dim);
        Self::new(Mlp::init(&shape, rng)?)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// Q-values, one per row.
    pub fn q(&self, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>, DdpgError> {
        Ok(self.net.predict_batch(states, Some(actions))?.into_vec())
    }
}
