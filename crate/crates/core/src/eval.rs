//! Waypoint-sequence evaluation of a trained policy, trajectory logging and
//! actor query timing.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddpg::{checkpoint, Actor, DdpgError};
use crate::sim::{EpisodeConfig, Event, LidarSpec, NavEnv, Point, RewardConfig, RobotState, WorldSpec};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid waypoint task: {0}")]
    Task(String),
    #[error("cannot parse waypoint task: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Policy(#[from] DdpgError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Start pose and ordered targets, as stored on disk:
///
/// ```json
/// {"start": [0.8, 0.8, 0.0], "targets": [[3.5, 1.0], [6.0, 2.0]], "trials": 5}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointTask {
    /// x, y, heading
    pub start: [f64; 3],
    pub targets: Vec<[f64; 2]>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    5
}

impl WaypointTask {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let task: Self = serde_json::from_str(text)?;
        if task.targets.is_empty() {
            return Err(EvalError::Task("no targets".into()));
        }
        if task.trials == 0 {
            return Err(EvalError::Task("trials must be at least 1".into()));
        }
        if task.start.iter().chain(task.targets.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(EvalError::Task("non-finite coordinate".into()));
        }
        Ok(task)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serializes")
    }

    /// Start and targets must keep at least `min_clearance` from every
    /// wall and obstacle.
    pub fn check_world(&self, world: &WorldSpec, min_clearance: f64) -> Result<(), EvalError> {
        let start = Point::new(self.start[0], self.start[1]);
        if world.clearance(start) <= min_clearance {
            return Err(EvalError::Task(format!("start ({}, {}) is not collision-free", start.x, start.y)));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if world.clearance(Point::new(t[0], t[1])) <= min_clearance {
                return Err(EvalError::Task(format!("target {i} ({}, {}) is not collision-free", t[0], t[1])));
            }
        }
        Ok(())
    }
}

/// Maps an observation to a command in physical units.
pub trait Policy {
    fn action(&mut self, obs: &[f64]) -> Result<Vec<f64>, DdpgError>;
}

impl Policy for Actor {
    fn action(&mut self, obs: &[f64]) -> Result<Vec<f64>, DdpgError> {
        Ok(self.act(obs, None)?.scaled)
    }
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn action(&mut self, obs: &[f64]) -> Result<Vec<f64>, DdpgError> {
        (**self).action(obs)
    }
}

/// Ignores the observation.
#[derive(Clone, Debug)]
pub struct ConstantPolicy(pub Vec<f64>);

impl Policy for ConstantPolicy {
    fn action(&mut self, _obs: &[f64]) -> Result<Vec<f64>, DdpgError> {
        Ok(self.0.clone())
    }
}

pub fn load_policy(dir: impl AsRef<Path>) -> Result<Actor, EvalError> {
    Ok(checkpoint::load_actor(dir)?)
}

/// Marks why a trajectory row exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// robot placed at the task start
    Start,
    /// robot moved to a failed target
    Reset,
    Step(Event),
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Start => "start",
            RowKind::Reset => "reset",
            RowKind::Step(e) => e.as_str(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "start" => RowKind::Start,
            "reset" => RowKind::Reset,
            "none" => RowKind::Step(Event::None),
            "arrive" => RowKind::Step(Event::Arrive),
            "collide" => RowKind::Step(Event::Collide),
            "timeout" => RowKind::Step(Event::Timeout),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajRow {
    /// control steps since the evaluation began
    pub step: u64,
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
    pub v_mps: f64,
    pub w_radps: f64,
    pub reward: f64,
    pub kind: RowKind,
    pub target_idx: usize,
}

pub const TRAJECTORY_HEADER: &str = "step,t_s,x_m,y_m,theta_rad,v_mps,w_radps,reward,event,target_idx";

pub fn write_trajectory(rows: &[TrajRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t_s,
            r.x_m,
            r.y_m,
            r.theta_rad,
            r.v_mps,
            r.w_radps,
            r.reward,
            r.kind.as_str(),
            r.target_idx
        )?;
    }
    Ok(())
}

/// Non-timing results, derived from a trajectory alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub trials: u64,
    /// per trial, averaged over trials
    pub total_time: f64,
    /// per trial, averaged over trials
    pub total_distance: f64,
    pub successes: u64,
    pub collisions: u64,
    pub timeouts: u64,
}

impl TrajectoryStats {
    /// Distance sums the displacement between consecutive rows, skipping
    /// the jump into every start or reset row.
    pub fn from_rows(rows: &[TrajRow], dt: f64) -> Self {
        let mut s = TrajectoryStats::default();
        let mut steps = 0u64;
        let mut distance = 0.0;
        let mut prev: Option<&TrajRow> = None;
        for r in rows {
            match r.kind {
                RowKind::Start => s.trials += 1,
                RowKind::Reset => {}
                RowKind::Step(e) => {
                    steps += 1;
                    if let Some(p) = prev {
                        distance += (r.x_m - p.x_m).hypot(r.y_m - p.y_m);
                    }
                    match e {
                        Event::Arrive => s.successes += 1,
                        Event::Collide => s.collisions += 1,
                        Event::Timeout => s.timeouts += 1,
                        Event::None => {}
                    }
                }
            }
            prev = Some(r);
        }
        let n = s.trials.max(1) as f64;
        s.total_time = steps as f64 * dt / n;
        s.total_distance = distance / n;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub stats: TrajectoryStats,
    /// legs that started inside the arrival radius count as successes
    /// without a step row
    pub instant_arrivals: u64,
    /// commands per minute implied by the mean query latency
    pub max_control_frequency: f64,
    pub mean_query_latency: f64,
    pub p99_query_latency: f64,
}

impl MetricsReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are plain numbers")
    }

    pub const CSV_HEADER: &'static str = "trials,total_time_s,total_distance_m,successes,collisions,timeouts,\
max_control_frequency_per_min,mean_query_latency_s,p99_query_latency_s";

    pub fn csv_row(&self) -> String {
        let s = &self.stats;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            s.trials,
            s.total_time,
            s.total_distance,
            s.successes,
            s.collisions,
            s.timeouts,
            self.max_control_frequency,
            self.mean_query_latency,
            self.p99_query_latency
        )
    }
}

pub struct EvalOutcome {
    pub report: MetricsReport,
    pub trajectory: Vec<TrajRow>,
}

/// Everything the evaluator needs to build its environment.
#[derive(Clone, Debug)]
pub struct EvalSetup {
    pub world: Arc<WorldSpec>,
    pub lidar: LidarSpec,
    pub reward: RewardConfig,
    pub episode: EpisodeConfig,
}

impl EvalSetup {
    pub fn new(world: Arc<WorldSpec>) -> Self {
        Self {
            world,
            lidar: LidarSpec::default(),
            reward: RewardConfig::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

fn row(step: u64, dt: f64, robot: RobotState, cmd: [f64; 2], reward: f64, kind: RowKind, idx: usize) -> TrajRow {
    TrajRow {
        step,
        t_s: step as f64 * dt,
        x_m: robot.x,
        y_m: robot.y,
        theta_rad: robot.theta,
        v_mps: cmd[0],
        w_radps: cmd[1],
        reward,
        kind,
        target_idx: idx,
    }
}

/// Visits the targets in order, `task.trials` times, with a greedy policy.
/// Each leg has the episode step budget. After a collision or timeout the
/// robot is placed on the failed target, keeping its heading, and the
/// next leg starts from there.
pub fn run_waypoint_eval(task: &WaypointTask, policy: &mut dyn Policy, setup: &EvalSetup) -> Result<EvalOutcome, EvalError> {
    task.check_world(&setup.world, setup.reward.c_o)?;
    let dt = setup.episode.dt;
    let mut env = NavEnv::new(
        Arc::clone(&setup.world),
        setup.lidar.clone(),
        setup.reward.clone(),
        setup.episode.clone(),
    );
    let mut rows = Vec::new();
    let mut latencies = Vec::new();
    let mut step = 0u64;
    let mut instant = 0u64;
    for _ in 0..task.trials {
        let mut robot = RobotState::new(task.start[0], task.start[1], task.start[2]);
        rows.push(row(step, dt, robot, [0.0, 0.0], 0.0, RowKind::Start, 0));
        for (idx, t) in task.targets.iter().enumerate() {
            let target = Point::new(t[0], t[1]);
            if robot.position().distance(target) < setup.reward.c_d {
                instant += 1;
                continue;
            }
            let mut obs = env.reset_to(robot, target).to_vec();
            loop {
                let started = Instant::now();
                let a = policy.action(&obs)?;
                latencies.push(started.elapsed().as_secs_f64());
                let [v, w] = a[..] else {
                    return Err(EvalError::Task(format!("policy returned {} values, expected 2", a.len())));
                };
                let s = env.step_cmd(v, w)?;
                step += 1;
                robot = env.robot();
                rows.push(row(step, dt, robot, [v, w], s.reward, RowKind::Step(s.event), idx));
                match s.event {
                    Event::None => obs = s.obs.to_vec(),
                    Event::Arrive => break,
                    Event::Collide | Event::Timeout => {
                        robot = RobotState::new(target.x, target.y, robot.theta);
                        rows.push(row(step, dt, robot, [0.0, 0.0], 0.0, RowKind::Reset, idx));
                        break;
                    }
                }
            }
        }
    }
    let mut stats = TrajectoryStats::from_rows(&rows, dt);
    stats.successes += instant;
    let timing = LatencyReport::from_samples(latencies);
    Ok(EvalOutcome {
        report: MetricsReport {
            stats,
            instant_arrivals: instant,
            max_control_frequency: timing.as_ref().map_or(0.0, |t| 60.0 / t.mean_s),
            mean_query_latency: timing.as_ref().map_or(0.0, |t| t.mean_s),
            p99_query_latency: timing.as_ref().map_or(0.0, |t| t.p99_s),
        },
        trajectory: rows,
    })
}

/// Outcome counts over independent random episodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub episodes: u64,
    pub arrivals: u64,
    pub collisions: u64,
    pub timeouts: u64,
}

impl PairStats {
    pub fn arrival_rate(&self) -> f64 {
        self.arrivals as f64 / self.episodes.max(1) as f64
    }

    pub fn collision_rate(&self) -> f64 {
        self.collisions as f64 / self.episodes.max(1) as f64
    }
}

/// Runs `n` greedy episodes, each from a fresh random start and target
/// drawn as in training. The draws depend only on `seed`.
pub fn random_pair_eval(policy: &mut dyn Policy, setup: &EvalSetup, n: u64, seed: u64) -> Result<PairStats, EvalError> {
    let mut env = NavEnv::new(
        Arc::clone(&setup.world),
        setup.lidar.clone(),
        setup.reward.clone(),
        setup.episode.clone(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = PairStats::default();
    for _ in 0..n {
        let mut obs = env.reset_random(&mut rng)?.to_vec();
        let event = loop {
            let a = policy.action(&obs)?;
            let [v, w] = a[..] else {
                return Err(EvalError::Task(format!("policy returned {} values, expected 2", a.len())));
            };
            let s = env.step_cmd(v, w)?;
            if s.event != Event::None {
                break s.event;
            }
            obs = s.obs.to_vec();
        };
        stats.episodes += 1;
        match event {
            Event::Arrive => stats.arrivals += 1,
            Event::Collide => stats.collisions += 1,
            _ => stats.timeouts += 1,
        }
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub n: usize,
    pub mean_s: f64,
    pub p99_s: f64,
}

impl LatencyReport {
    /// Nearest-rank p99. `None` when there are no samples.
    pub fn from_samples(mut samples: Vec<f64>) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len();
        let mean_s = samples.iter().sum::<f64>() / n as f64;
        samples.sort_by(f64::total_cmp);
        let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            n,
            mean_s,
            p99_s: samples[rank - 1],
        })
    }

    pub fn to_toml(&self) -> String {
        let mut s = toml::to_string(self).expect("plain numbers");
        let _ = writeln!(s, "max_control_frequency_per_min = {}", 60.0 / self.mean_s);
        s
    }
}

pub const MIN_QUERIES: usize = 1000;

fn random_inputs(obs_dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..obs_dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Times `n_queries` single forward passes on random observations in
/// `[0, 1)`. Fewer than [`MIN_QUERIES`] queries are rounded up.
pub fn measure_query_latency(policy: &mut dyn Policy, obs_dim: usize, n_queries: usize, seed: u64) -> Result<LatencyReport, DdpgError> {
    let n = n_queries.max(MIN_QUERIES);
    let inputs = random_inputs(obs_dim, n, seed);
    // warm caches and the allocator
    for o in inputs.iter().take(16) {
        std::hint::black_box(policy.action(o)?);
    }
    let mut samples = Vec::with_capacity(n);
    for o in &inputs {
        let t = Instant::now();
        std::hint::black_box(policy.action(std::hint::black_box(o))?);
        samples.push(t.elapsed().as_secs_f64());
    }
    Ok(LatencyReport::from_samples(samples).expect("at least one sample"))
}

/// Completed `act()` calls per minute in a tight loop lasting `duration`
/// (at least one second).
pub fn max_control_frequency(policy: &mut dyn Policy, obs_dim: usize, duration: Duration, seed: u64) -> Result<f64, DdpgError> {
    let duration = duration.max(Duration::from_secs(1));
    let inputs = random_inputs(obs_dim, 256, seed);
    let start = Instant::now();
    let mut count = 0u64;
    loop {
        for o in &inputs {
            std::hint::black_box(policy.action(std::hint::black_box(o))?);
        }
        count += inputs.len() as u64;
        let elapsed = start.elapsed();
        if elapsed >= duration {
            return Ok(count as f64 * 60.0 / elapsed.as_secs_f64());
        }
    }
}
