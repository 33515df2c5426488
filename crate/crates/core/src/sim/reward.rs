use serde::{Deserialize, Serialize};

/// Reward constants: a bonus on arrival, a penalty on collision, and
/// otherwise progress toward the target scaled by `c_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub r_arrive: f64,
    pub r_collision: f64,
    pub c_r: f64,
    /// arrival distance, meters
    pub c_d: f64,
    /// collision range, meters
    pub c_o: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_arrive: 20.0,
            r_collision: -20.0,
            c_r: 10.0,
            c_d: 0.2,
            c_o: 0.25,
        }
    }
}

impl RewardConfig {
    /// `min_range` is the sensor's shortest reading.
    pub fn validate(&self, min_range: f64) -> Result<(), (&'static str, String)> {
        if !(self.r_arrive > 0.0) {
            return Err(("r_arrive", format!("must be positive, got {}", self.r_arrive)));
        }
        if !(self.r_collision < 0.0) {
            return Err(("r_collision", format!("must be negative, got {}", self.r_collision)));
        }
        if !self.c_r.is_finite() {
            return Err(("c_r", "must be finite".into()));
        }
        if !(self.c_d > 0.0 && self.c_d.is_finite()) {
            return Err(("c_d", format!("must be positive, got {}", self.c_d)));
        }
        if !(self.c_o >= min_range && self.c_o.is_finite()) {
            return Err(("c_o", format!("must be at least the lidar min_range {min_range}, got {}", self.c_o)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terminal {
    Arrive,
    Collide,
    None,
}

/// Arrival is checked before collision; exactly one branch fires.
pub fn compute_reward(d_prev: f64, d_t: f64, min_raw_range: f64, cfg: &RewardConfig) -> (f64, Terminal) {
    if d_t < cfg.c_d {
        (cfg.r_arrive, Terminal::Arrive)
    } else if min_raw_range < cfg.c_o {
        (cfg.r_collision, Terminal::Collide)
    } else {
        (cfg.c_r * (d_prev - d_t), Terminal::None)
    }
}
