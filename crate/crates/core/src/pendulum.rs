//! Torque-limited pendulum swing-up, and a side-by-side training comparison
//! of interleaved (one env step per train step) against threaded sample
//! collection.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ddpg::{Actor, Critic, Ddpg, DdpgError, Hyperparams};
use crate::env::{EnvError, Environment, Step};
use crate::runner::{run_training, MetricsRow, Mode, NoiseConfig, NullObserver, RunConfig, RunCounters, RunError};
use crate::sim::wrap_angle;

pub const G: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
pub const EPISODE_STEPS: usize = 200;

/// Angle 0 is upright.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumState {
    pub th: f64,
    pub thdot: f64,
}

impl PendulumState {
    pub fn obs(&self) -> [f64; 3] {
        [self.th.cos(), self.th.sin(), self.thdot]
    }
}

/// One Euler step under torque `u` (clipped to the torque bound). The reward
/// is charged on the state the step starts from.
pub fn pendulum_step(s: PendulumState, u: f64) -> (PendulumState, f64, [f64; 3]) {
    let u = u.clamp(-MAX_TORQUE, MAX_TORQUE);
    let th_n = wrap_angle(s.th);
    let reward = -(th_n * th_n + 0.1 * s.thdot * s.thdot + 0.001 * u * u);
    let acc = 3.0 * G / (2.0 * LENGTH) * s.th.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let thdot = (s.thdot + acc * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let next = PendulumState {
        th: s.th + thdot * DT,
        thdot,
    };
    (next, reward, next.obs())
}

/// Fixed-length episodes; never terminal, always truncated at the end.
#[derive(Clone, Debug, Default)]
pub struct Pendulum {
    state: Option<PendulumState>,
    steps: usize,
}

impl Pendulum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> Option<PendulumState> {
        self.state
    }

    pub fn reset_to(&mut self, s: PendulumState) -> [f64; 3] {
        self.state = Some(s);
        self.steps = 0;
        s.obs()
    }
}

impl Environment for Pendulum {
    fn obs_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EnvError> {
        // (-π, π]
        let th = PI - rng.random::<f64>() * 2.0 * PI;
        let thdot = rng.random_range(-1.0..1.0);
        Ok(self.reset_to(PendulumState { th, thdot }).to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError> {
        let [u] = action else {
            return Err(EnvError::InvalidAction(format!("expected 1 value, got {}", action.len())));
        };
        if !u.is_finite() {
            return Err(EnvError::InvalidAction(format!("torque {u}")));
        }
        let s = self.state.ok_or(EnvError::NotStarted)?;
        if self.steps >= EPISODE_STEPS {
            return Err(EnvError::EpisodeFinished);
        }
        let (next, reward, obs) = pendulum_step(s, *u);
        self.state = Some(next);
        self.steps += 1;
        Ok(Step {
            obs: obs.to_vec(),
            reward,
            terminal: false,
            truncated: self.steps == EPISODE_STEPS,
        })
    }
}

pub const HIDDEN: [usize; 2] = [64, 64];

/// Learning rates and target rate tuned for this task.
pub fn default_hyperparams() -> Hyperparams {
    Hyperparams {
        gamma: 0.99,
        tau: 0.005,
        lr_actor: 1e-3,
        lr_critic: 1e-3,
        batch_size: 64,
        buffer_capacity: 100_000,
        warmup_steps: 1_000,
    }
}

/// 3→64→64→1 actor with torque scaling and a critic taking the action at
/// its second layer.
pub fn new_agent(hidden: &[usize], hp: Hyperparams, seed: u64) -> Result<Ddpg, DdpgError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = Actor::symmetric(3, hidden, 1, MAX_TORQUE, &mut rng)?;
    let critic = Critic::init(3, 1, hidden, 1.min(hidden.len()), &mut rng)?;
    Ddpg::new(actor, critic, hp)
}

/// Mean undiscounted return of `policy` over full episodes.
pub fn average_return(mut policy: impl FnMut(&[f64], &mut ChaCha8Rng) -> f64, episodes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Pendulum::new();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset(&mut rng).expect("reset cannot fail");
        loop {
            let u = policy(&obs, &mut rng);
            let step = env.step(&[u]).expect("finite torque within an episode");
            total += step.reward;
            if step.done() {
                break;
            }
            obs = step.obs;
        }
    }
    total / episodes.max(1) as f64
}

/// Greedy return of a trained actor.
pub fn evaluate(actor: &Actor, episodes: usize, seed: u64) -> Result<f64, DdpgError> {
    let mut err = None;
    let r = average_return(
        |obs, _| match actor.act(obs, None) {
            Ok(out) => out.scaled[0],
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        episodes,
        seed,
    );
    err.map_or(Ok(r), Err)
}

/// Return of uniformly random torques.
pub fn random_return(episodes: usize, seed: u64) -> f64 {
    average_return(|_, rng| rng.random_range(-MAX_TORQUE..MAX_TORQUE), episodes, seed)
}

#[derive(Clone, Debug)]
pub struct CompareOptions {
    pub seeds: Vec<u64>,
    pub train_steps: u64,
    pub hidden: Vec<usize>,
    pub hp: Hyperparams,
    pub noise: NoiseConfig,
    pub n_samplers: usize,
    /// async sampler throttle, see [`RunConfig::max_samples_per_train`]
    pub max_samples_per_train: f64,
    pub eval_episodes: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            train_steps: 20_000,
            hidden: HIDDEN.to_vec(),
            hp: default_hyperparams(),
            noise: NoiseConfig::default(),
            n_samplers: 1,
            max_samples_per_train: 4.0,
            eval_episodes: 10,
        }
    }
}

/// One configuration trained on one seed.
#[derive(Clone, Debug)]
pub struct ModeRun {
    pub rows: Vec<MetricsRow>,
    pub counters: RunCounters,
    /// trapezoidal area under the mean-Q curve over train iterations
    pub q_auc: f64,
    pub eval_return: f64,
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub sync: ModeRun,
    pub threaded: ModeRun,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub random_return: f64,
    pub seeds: Vec<SeedResult>,
}

pub fn q_auc(rows: &[MetricsRow]) -> f64 {
    rows.windows(2)
        .map(|w| 0.5 * (w[0].mean_q + w[1].mean_q) * (w[1].iter - w[0].iter) as f64)
        .sum()
}

fn train_one(opts: &CompareOptions, seed: u64, mode: Mode) -> Result<ModeRun, RunError> {
    let agent = new_agent(&opts.hidden, opts.hp.clone(), seed)?;
    let cfg = RunConfig {
        mode,
        n_samplers: opts.n_samplers,
        sync_env_steps_per_train: 1,
        total_train_steps: opts.train_steps,
        snapshot_interval: 1,
        checkpoint_interval: 0,
        max_samples_per_train: opts.max_samples_per_train,
        seed,
    };
    let out = run_training(|_| Ok(Pendulum::new()), agent, &opts.noise, &cfg, &mut NullObserver)?;
    let eval_return = evaluate(&out.agent.actor, opts.eval_episodes, seed ^ 0x5eed)?;
    Ok(ModeRun {
        q_auc: q_auc(&out.rows),
        rows: out.rows,
        counters: out.counters,
        eval_return,
    })
}

/// Trains both configurations on every seed.
pub fn addpg_vs_ddpg_compare(opts: &CompareOptions) -> Result<ComparisonReport, RunError> {
    if opts.seeds.len() < 3 {
        return Err(RunError::Config(format!("need at least 3 seeds, got {}", opts.seeds.len())));
    }
    let mut seeds = Vec::with_capacity(opts.seeds.len());
    for &seed in &opts.seeds {
        seeds.push(SeedResult {
            seed,
            sync: train_one(opts, seed, Mode::Sync)?,
            threaded: train_one(opts, seed, Mode::Async)?,
        });
    }
    Ok(ComparisonReport {
        random_return: random_return(opts.eval_episodes.max(1), 0x5eed),
        seeds,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    random_return: f64,
    seed: Vec<SeedSummary<'a>>,
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    sync: ModeSummary<'a>,
    #[serde(rename = "async")]
    threaded: ModeSummary<'a>,
}

#[derive(Serialize)]
struct ModeSummary<'a> {
    mode: &'a str,
    train_iterations: u64,
    samples_collected: u64,
    samples_per_iteration: f64,
    q_auc: f64,
    eval_return: f64,
    wall_s: f64,
}

fn mode_summary<'a>(mode: &'a str, r: &ModeRun) -> ModeSummary<'a> {
    ModeSummary {
        mode,
        train_iterations: r.counters.train_iterations,
        samples_collected: r.counters.samples_collected,
        samples_per_iteration: r.counters.samples_collected as f64 / r.counters.train_iterations.max(1) as f64,
        q_auc: r.q_auc,
        eval_return: r.eval_return,
        wall_s: r.counters.wall_time,
    }
}

impl ComparisonReport {
    pub fn write_curves(&self, mut out: impl Write, threaded: bool) -> io::Result<()> {
        writeln!(out, "seed,iter,samples,mean_q,mean_return,wall_s")?;
        for s in &self.seeds {
            let run = if threaded { &s.threaded } else { &s.sync };
            for r in &run.rows {
                writeln!(out, "{},{},{},{},{},{}", s.seed, r.iter, r.samples, r.mean_q, r.mean_return, r.wall_s)?;
            }
        }
        Ok(())
    }

    pub fn summary_toml(&self) -> String {
        let summary = Summary {
            random_return: self.random_return,
            seed: self
                .seeds
                .iter()
                .map(|s| SeedSummary {
                    seed: s.seed,
                    sync: mode_summary("sync", &s.sync),
                    threaded: mode_summary("async", &s.threaded),
                })
                .collect(),
        };
        toml::to_string(&summary).expect("summary fields are plain numbers and strings")
    }

    /// Writes `sync.csv`, `async.csv` and `summary.toml` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        self.write_curves(io::BufWriter::new(fs::File::create(dir.join("sync.csv"))?), false)?;
        self.write_curves(io::BufWriter::new(fs::File::create(dir.join("async.csv"))?), true)?;
        fs::write(dir.join("summary.toml"), self.summary_toml())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_rest_is_fixed() {
        let s = PendulumState { th: 0.0, thdot: 0.0 };
        let (n, r, obs) = pendulum_step(s, 0.0);
        assert_eq!(n, s);
        assert_eq!(r, 0.0);
        assert_eq!(obs, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn hanging_rest() {
        let (n, r, _) = pendulum_step(PendulumState { th: PI, thdot: 0.0 }, 0.0);
        assert!((r + PI * PI).abs() < 1e-12);
        // sin(π) is 1.2e-16 in floating point
        assert!(n.thdot.abs() < 1e-14);
    }

    #[test]
    fn quarter_turn_hand_arithmetic() {
        let (n, r, _) = pendulum_step(PendulumState { th: PI / 2.0, thdot: 0.0 }, 1.0);
        // thdot' = (15·1 + 3·1)·0.05
        assert!((n.thdot - 0.9).abs() <= 1e-12);
        assert!((n.th - (PI / 2.0 + 0.045)).abs() <= 1e-12);
        assert!((r - -(PI * PI / 4.0 + 0.001)).abs() <= 1e-12);
    }

    #[test]
    fn episode_is_200_steps() {
        let mut env = Pendulum::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng).unwrap();
        for k in 1..=EPISODE_STEPS {
            let s = env.step(&[0.5]).unwrap();
            assert!(!s.terminal);
            assert_eq!(s.truncated, k == EPISODE_STEPS);
        }
        assert_eq!(env.step(&[0.0]), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn too_few_seeds_rejected() {
        let opts = CompareOptions {
            seeds: vec![1, 2],
            ..CompareOptions::default()
        };
        assert!(matches!(addpg_vs_ddpg_compare(&opts), Err(RunError::Config(_))));
    }

    #[test]
    fn auc_of_constant_curve() {
        let rows: Vec<MetricsRow> = (1..=11)
            .map(|i| MetricsRow {
                iter: i,
                samples: i,
                mean_q: 2.0,
                mean_return: f64::NAN,
                wall_s: 0.0,
            })
            .collect();
        assert_eq!(q_auc(&rows), 20.0);
    }
}
