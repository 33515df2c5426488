use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Point;
use super::kinematics::{relative_target_polar, step_kinematics, RobotState};
use super::lidar::{scan, LidarSpec};
use super::reward::{compute_reward, RewardConfig, Terminal};
use super::world::{Rect, WorldSpec};
use crate::env::{EnvError, Environment, Step};

/// Rejection-sampling budget before a world is declared infeasible.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// seconds per control step
    pub dt: f64,
    pub max_steps: usize,
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub w_max: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            max_steps: 500,
            v_max: 0.5,
            w_max: 1.0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(("max_steps", "must be at least 1".into()));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(("v_max", format!("must be positive, got {}", self.v_max)));
        }
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return Err(("w_max", format!("must be positive, got {}", self.w_max)));
        }
        Ok(())
    }
}

/// Network input: normalized ranges, previous command, target in polar form.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub ranges: Vec<f64>,
    /// (m/s, rad/s)
    pub prev_cmd: [f64; 2],
    /// (m, rad)
    pub target_polar: [f64; 2],
}

impl Observation {
    pub fn width(&self) -> usize {
        self.ranges.len() + 4
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.width());
        v.extend_from_slice(&self.ranges);
        v.extend_from_slice(&self.prev_cmd);
        v.extend_from_slice(&self.target_polar);
        v
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        let n = v.len().checked_sub(4)?;
        Some(Self {
            ranges: v[..n].to_vec(),
            prev_cmd: [v[n], v[n + 1]],
            target_polar: [v[n + 2], v[n + 3]],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    None,
    Arrive,
    Collide,
    Timeout,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::None => "none",
            Event::Arrive => "arrive",
            Event::Collide => "collide",
            Event::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NavStep {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub event: Event,
}

fn sample_in(rect: Rect, world: &WorldSpec, rng: &mut impl Rng, clearance: f64) -> Result<Point, EnvError> {
    for _ in 0..MAX_REJECTIONS {
        let p = Point::new(
            rect.x0 + rect.width() * rng.random::<f64>(),
            rect.y0 + rect.height() * rng.random::<f64>(),
        );
        if world.clearance(p) >= clearance {
            return Ok(p);
        }
    }
    Err(EnvError::Infeasible(format!(
        "no point with clearance {clearance} m found after {MAX_REJECTIONS} samples"
    )))
}

/// Uniform point over the world bounds at least `clearance` from every
/// wall and obstacle.
pub fn sample_free_pose(world: &WorldSpec, rng: &mut impl Rng, clearance: f64) -> Result<Point, EnvError> {
    sample_in(world.bounds(), world, rng, clearance)
}

/// Point-to-point navigation task in a polygonal world.
#[derive(Clone, Debug)]
pub struct NavEnv {
    world: Arc<WorldSpec>,
    lidar: LidarSpec,
    reward: RewardConfig,
    episode: EpisodeConfig,
    robot: RobotState,
    target: Point,
    prev_cmd: [f64; 2],
    d_prev: f64,
    steps: usize,
    state: EpisodeState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EpisodeState {
    Idle,
    Running,
    Done,
}

impl NavEnv {
    pub fn new(world: Arc<WorldSpec>, lidar: LidarSpec, reward: RewardConfig, episode: EpisodeConfig) -> Self {
        Self {
            world,
            lidar,
            reward,
            episode,
            robot: RobotState::new(0.0, 0.0, 0.0),
            target: Point::default(),
            prev_cmd: [0.0, 0.0],
            d_prev: 0.0,
            steps: 0,
            state: EpisodeState::Idle,
        }
    }

    pub fn world(&self) -> &WorldSpec {
        &self.world
    }

    pub fn robot(&self) -> RobotState {
        self.robot
    }

    pub fn target(&self) -> Point {
        self.target
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn lidar(&self) -> &LidarSpec {
        &self.lidar
    }

    pub fn is_done(&self) -> bool {
        self.state == EpisodeState::Done
    }

    /// Random start in the spawn region with a random heading, and a random
    /// collision-free target anywhere in the world farther than the arrival
    /// threshold.
    pub fn reset_random(&mut self, rng: &mut impl Rng) -> Result<Observation, EnvError> {
        let clearance = self.world.min_clearance();
        let start = sample_in(self.world.spawn(), &self.world, rng, clearance)?;
        let theta = rng.random_range(-PI..PI);
        let min_gap = 2.0 * self.reward.c_d;
        for _ in 0..MAX_REJECTIONS {
            let target = sample_free_pose(&self.world, rng, clearance)?;
            if target.distance(start) > min_gap {
                return Ok(self.reset_to(RobotState::new(start.x, start.y, theta), target));
            }
        }
        Err(EnvError::Infeasible("no target far enough from the start".into()))
    }

    /// Starts an episode from an explicit pose and target.
    pub fn reset_to(&mut self, robot: RobotState, target: Point) -> Observation {
        self.robot = robot;
        self.target = target;
        self.prev_cmd = [0.0, 0.0];
        self.steps = 0;
        self.d_prev = robot.position().distance(target);
        self.state = EpisodeState::Running;
        self.observe()
    }

    /// Moves the target without restarting the step count.
    pub fn set_target(&mut self, target: Point) {
        self.target = target;
        self.d_prev = self.robot.position().distance(target);
    }

    pub fn observe(&self) -> Observation {
        let (d, phi) = relative_target_polar(&self.robot, self.target);
        Observation {
            ranges: scan(&self.world, &self.robot, &self.lidar),
            prev_cmd: self.prev_cmd,
            target_polar: [d, phi],
        }
    }

    /// Applies `(v, w)` for one control period.
    pub fn step_cmd(&mut self, v: f64, w: f64) -> Result<NavStep, EnvError> {
        match self.state {
            EpisodeState::Idle => return Err(EnvError::NotStarted),
            EpisodeState::Done => return Err(EnvError::EpisodeFinished),
            EpisodeState::Running => {}
        }
        let tol = 1e-12;
        if !(v.is_finite() && w.is_finite() && v.abs() <= self.episode.v_max + tol && w.abs() <= self.episode.w_max + tol) {
            return Err(EnvError::InvalidAction(format!(
                "({v}, {w}) outside |v| <= {}, |w| <= {}",
                self.episode.v_max, self.episode.w_max
            )));
        }
        self.robot = step_kinematics(&self.robot, v, w, self.episode.dt);
        self.prev_cmd = [v, w];
        self.steps += 1;
        let obs = self.observe();
        let d_t = obs.target_polar[0];
        let min_raw = self.lidar.max_range * obs.ranges.iter().copied().fold(f64::INFINITY, f64::min);
        let (reward, terminal) = compute_reward(self.d_prev, d_t, min_raw, &self.reward);
        self.d_prev = d_t;
        let event = match terminal {
            Terminal::Arrive => Event::Arrive,
            Terminal::Collide => Event::Collide,
            Terminal::None if self.steps >= self.episode.max_steps => Event::Timeout,
            Terminal::None => Event::None,
        };
        let done = event != Event::None;
        if done {
            self.state = EpisodeState::Done;
        }
        Ok(NavStep {
            obs,
            reward,
            done,
            event,
        })
    }
}

impl Environment for NavEnv {
    fn obs_dim(&self) -> usize {
        self.lidar.n_beams + 4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EnvError> {
        Ok(self.reset_random(rng)?.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError> {
        let [v, w] = action else {
            return Err(EnvError::InvalidAction(format!("expected 2 values, got {}", action.len())));
        };
        let s = self.step_cmd(*v, *w)?;
        Ok(Step {
            obs: s.obs.to_vec(),
            reward: s.reward,
            terminal: matches!(s.event, Event::Arrive | Event::Collide),
            truncated: s.event == Event::Timeout,
        })
    }
}
