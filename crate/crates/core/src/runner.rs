//! Training loop with sample collection either interleaved with training
//! (sync) or running on separate sampler threads (async).

use std::collections::VecDeque;
use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddpg::{Actor, Batch, Ddpg, DdpgError, OuNoise, ReplayBuffer, Transition};
use crate::env::{EnvError, Environment};

/// Number of completed episodes averaged into `mean_return`.
pub const RETURN_WINDOW: usize = 10;

const IDLE_SLEEP: Duration = Duration::from_micros(200);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sync,
    Async,
}

/// Exploration noise. Sigma decays linearly from `sigma` to `sigma_final`
/// over the run's train steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub theta: f64,
    pub sigma: f64,
    pub sigma_final: f64,
    pub dt: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            theta: 0.15,
            sigma: 0.2,
            sigma_final: 0.05,
            dt: 1.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(("theta", format!("must be non-negative, got {}", self.theta)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(("sigma", format!("must be non-negative, got {}", self.sigma)));
        }
        if !(self.sigma_final >= 0.0 && self.sigma_final.is_finite()) {
            return Err(("sigma_final", format!("must be non-negative, got {}", self.sigma_final)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(("dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    fn sigma_at(&self, iter: u64, total: u64) -> f64 {
        let frac = if total == 0 { 0.0 } else { (iter as f64 / total as f64).min(1.0) };
        self.sigma + (self.sigma_final - self.sigma) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub n_samplers: usize,
    /// env steps per train step in sync mode
    pub sync_env_steps_per_train: usize,
    pub total_train_steps: u64,
    /// train steps between actor publications to the samplers
    pub snapshot_interval: u64,
    /// train steps between checkpoints; 0 disables
    pub checkpoint_interval: u64,
    /// async samplers pause once they are this many samples per train step
    /// ahead of the trainer (after warmup); 0 disables
    pub max_samples_per_train: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sync,
            n_samplers: 1,
            sync_env_steps_per_train: 1,
            total_train_steps: 10_000,
            snapshot_interval: 1,
            checkpoint_interval: 0,
            max_samples_per_train: 0.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.n_samplers == 0 {
            return Err(("n_samplers", "must be at least 1".into()));
        }
        if self.sync_env_steps_per_train == 0 {
            return Err(("sync_env_steps_per_train", "must be at least 1".into()));
        }
        if self.snapshot_interval == 0 {
            return Err(("snapshot_interval", "must be at least 1".into()));
        }
        let r = self.max_samples_per_train;
        if !(r == 0.0 || (r >= 1.0 && r.is_finite())) {
            return Err(("max_samples_per_train", format!("must be 0 or at least 1, got {r}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunCounters {
    pub samples_collected: u64,
    pub train_iterations: u64,
    pub episodes: u64,
    pub wall_time: f64,
}

/// One metrics log row, written after every train step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub samples: u64,
    pub mean_q: f64,
    /// mean of the last completed episodes, NaN before the first one ends
    pub mean_return: f64,
    /// always 0 in sync mode so logs stay reproducible
    pub wall_s: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] DdpgError),
    #[error("metrics sink failed: {0}")]
    Sink(#[from] io::Error),
    #[error("sampler {index} panicked: {message}")]
    SamplerPanic { index: usize, message: String },
    #[error("sampler {index} failed: {source}")]
    Sampler { index: usize, source: Box<RunError> },
}

/// Receives progress from the trainer thread.
pub trait TrainingObserver {
    fn on_row(&mut self, _row: &MetricsRow) -> Result<(), RunError> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _iter: u64, _agent: &Ddpg) -> Result<(), RunError> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NullObserver;

impl TrainingObserver for NullObserver {}

pub struct RunOutcome {
    pub agent: Ddpg,
    pub counters: RunCounters,
    /// actor snapshots handed to samplers, excluding the initial one
    pub publications: u64,
    pub rows: Vec<MetricsRow>,
}

pub const METRICS_HEADER: &str = "iter,samples,mean_q,mean_return,wall_s";

/// CSV metrics writer. The header goes out on construction.
pub struct MetricsLog<W: Write> {
    out: W,
}

impl<W: Write> MetricsLog<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn log_progress<W: Write>(log: &mut MetricsLog<W>, row: &MetricsRow) -> io::Result<()> {
    writeln!(
        log.out,
        "{},{},{},{},{}",
        row.iter, row.samples, row.mean_q, row.mean_return, row.wall_s
    )
}

/// Deep copy of the actor for read-only use by samplers.
pub fn publish_snapshot(actor: &Actor) -> Arc<Actor> {
    Arc::new(actor.clone())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn mean_recent(returns: &VecDeque<f64>) -> f64 {
    if returns.is_empty() {
        f64::NAN
    } else {
        returns.iter().sum::<f64>() / returns.len() as f64
    }
}

fn push_return(returns: &mut VecDeque<f64>, r: f64) {
    if returns.len() == RETURN_WINDOW {
        returns.pop_front();
    }
    returns.push_back(r);
}

/// Environment plus the per-episode bookkeeping one sampler needs.
struct Sampler<E> {
    env: E,
    noise: OuNoise,
    rng: ChaCha8Rng,
    obs: Option<Vec<f64>>,
    episode_return: f64,
}

struct Collected {
    transition: Transition,
    finished_return: Option<f64>,
}

impl<E: Environment> Sampler<E> {
    fn new(env: E, noise: &NoiseConfig, rng: ChaCha8Rng) -> Self {
        let dim = env.action_dim();
        Self {
            env,
            noise: OuNoise::new(dim, 0.0, noise.theta, noise.sigma, noise.dt),
            rng,
            obs: None,
            episode_return: 0.0,
        }
    }

    fn collect(&mut self, actor: &Actor, sigma: f64) -> Result<Collected, RunError> {
        let s = match self.obs.take() {
            Some(o) => o,
            None => self.env.reset(&mut self.rng)?,
        };
        self.noise.sigma = sigma;
        let noise = self.noise.step(&mut self.rng).to_vec();
        let out = actor.act(&s, Some(&noise))?;
        let step = self.env.step(&out.scaled)?;
        self.episode_return += step.reward;
        let done = step.done();
        let transition = Transition {
            s,
            a: out.raw,
            r: step.reward,
            s_next: step.obs.clone(),
            done: step.terminal,
        };
        let finished_return = if done {
            self.noise.reset();
            Some(std::mem::take(&mut self.episode_return))
        } else {
            self.obs = Some(step.obs);
            None
        };
        Ok(Collected {
            transition,
            finished_return,
        })
    }
}

/// Trains `agent` for `cfg.total_train_steps` steps. `make_env(i)` builds
/// the environment for sampler `i`.
pub fn run_training<E, F>(
    make_env: F,
    agent: Ddpg,
    noise: &NoiseConfig,
    cfg: &RunConfig,
    observer: &mut dyn TrainingObserver,
) -> Result<RunOutcome, RunError>
where
    E: Environment,
    F: Fn(usize) -> Result<E, EnvError> + Sync,
{
    cfg.validate().map_err(|(k, m)| RunError::Config(format!("{k}: {m}")))?;
    noise.validate().map_err(|(k, m)| RunError::Config(format!("noise.{k}: {m}")))?;
    agent
        .hp
        .validate()
        .map_err(|(k, m)| RunError::Config(format!("agent.{k}: {m}")))?;
    match cfg.mode {
        Mode::Sync => run_sync(make_env, agent, noise, cfg, observer),
        Mode::Async => run_async(make_env, agent, noise, cfg, observer),
    }
}

fn run_sync<E, F>(
    make_env: F,
    mut agent: Ddpg,
    noise: &NoiseConfig,
    cfg: &RunConfig,
    observer: &mut dyn TrainingObserver,
) -> Result<RunOutcome, RunError>
where
    E: Environment,
    F: Fn(usize) -> Result<E, EnvError>,
{
    let start = Instant::now();
    let mut counters = RunCounters::default();
    let mut rows = Vec::new();
    let mut publications = 0;
    if cfg.total_train_steps > 0 {
        let mut sampler = Sampler::new(make_env(0)?, noise, stream_rng(cfg.seed, 1));
        let mut batch_rng = stream_rng(cfg.seed, 0);
        let mut buffer = ReplayBuffer::new(agent.hp.buffer_capacity, agent.hp.warmup_steps);
        let mut returns = VecDeque::with_capacity(RETURN_WINDOW);
        // sync samplers read the trainer's actor directly, so each train
        // step is a publication
        while counters.train_iterations < cfg.total_train_steps {
            let sigma = noise.sigma_at(counters.train_iterations, cfg.total_train_steps);
            for _ in 0..cfg.sync_env_steps_per_train {
                let c = sampler.collect(&agent.actor, sigma)?;
                buffer.push(c.transition);
                counters.samples_collected += 1;
                if let Some(r) = c.finished_return {
                    push_return(&mut returns, r);
                    counters.episodes += 1;
                }
            }
            let Ok(ts) = buffer.sample(agent.hp.batch_size, &mut batch_rng) else {
                continue;
            };
            let stats = agent.train_step(&Batch::from_transitions(&ts).map_err(DdpgError::from)?)?;
            counters.train_iterations += 1;
            publications += 1;
            let row = MetricsRow {
                iter: counters.train_iterations,
                samples: counters.samples_collected,
                mean_q: stats.mean_q,
                mean_return: mean_recent(&returns),
                wall_s: 0.0,
            };
            observer.on_row(&row)?;
            rows.push(row);
            if cfg.checkpoint_interval > 0 && counters.train_iterations % cfg.checkpoint_interval == 0 {
                observer.on_checkpoint(counters.train_iterations, &agent)?;
            }
        }
    }
    counters.wall_time = start.elapsed().as_secs_f64();
    Ok(RunOutcome {
        agent,
        counters,
        publications,
        rows,
    })
}

/// State shared between trainer and samplers in async mode.
struct Shared {
    replay: Mutex<Replay>,
    snapshot: RwLock<Arc<Actor>>,
    samples: AtomicU64,
    episodes: AtomicU64,
    train_iterations: AtomicU64,
    stop: AtomicBool,
}

struct Replay {
    buffer: ReplayBuffer,
    returns: VecDeque<f64>,
}

/// Sets the stop flag when dropped, so samplers wind down even if the
/// trainer unwinds.
struct StopOnDrop<'a>(&'a AtomicBool);

impl Drop for StopOnDrop<'_> {
    fn drop(&mut self) {
        self.0.store(true, Ordering::SeqCst);
    }
}

/// Sample budget for throttled samplers: warmup plus `ratio` per train step.
struct Throttle {
    base: u64,
    ratio: f64,
}

impl Throttle {
    fn wait(&self, shared: &Shared) {
        while !shared.stop.load(Ordering::Relaxed) {
            let allowed = self.base as f64 + self.ratio * shared.train_iterations.load(Ordering::Relaxed) as f64;
            if (shared.samples.load(Ordering::Relaxed) as f64) < allowed {
                return;
            }
            thread::sleep(IDLE_SLEEP);
        }
    }
}

fn sampler_loop<E: Environment>(
    shared: &Shared,
    env: E,
    noise: &NoiseConfig,
    rng: ChaCha8Rng,
    total: u64,
    throttle: Option<&Throttle>,
) -> Result<(), RunError> {
    let mut sampler = Sampler::new(env, noise, rng);
    while !shared.stop.load(Ordering::Relaxed) {
        if let Some(t) = throttle {
            t.wait(shared);
        }
        let actor = Arc::clone(&shared.snapshot.read().unwrap_or_else(|e| e.into_inner()));
        let sigma = noise.sigma_at(shared.train_iterations.load(Ordering::Relaxed), total);
        let c = sampler.collect(&actor, sigma)?;
        {
            let mut replay = shared.replay.lock().unwrap_or_else(|e| e.into_inner());
            replay.buffer.push(c.transition);
            if let Some(r) = c.finished_return {
                push_return(&mut replay.returns, r);
            }
        }
        shared.samples.fetch_add(1, Ordering::SeqCst);
        if c.finished_return.is_some() {
            shared.episodes.fetch_add(1, Ordering::SeqCst);
        }
    }
    Ok(())
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

fn run_async<E, F>(
    make_env: F,
    mut agent: Ddpg,
    noise: &NoiseConfig,
    cfg: &RunConfig,
    observer: &mut dyn TrainingObserver,
) -> Result<RunOutcome, RunError>
where
    E: Environment,
    F: Fn(usize) -> Result<E, EnvError> + Sync,
{
    let start = Instant::now();
    if cfg.total_train_steps == 0 {
        return Ok(RunOutcome {
            agent,
            counters: RunCounters {
                wall_time: start.elapsed().as_secs_f64(),
                ..RunCounters::default()
            },
            publications: 0,
            rows: Vec::new(),
        });
    }
    let envs = (0..cfg.n_samplers).map(&make_env).collect::<Result<Vec<_>, _>>()?;
    let shared = Shared {
        replay: Mutex::new(Replay {
            buffer: ReplayBuffer::new(agent.hp.buffer_capacity, agent.hp.warmup_steps),
            returns: VecDeque::with_capacity(RETURN_WINDOW),
        }),
        snapshot: RwLock::new(publish_snapshot(&agent.actor)),
        samples: AtomicU64::new(0),
        episodes: AtomicU64::new(0),
        train_iterations: AtomicU64::new(0),
        stop: AtomicBool::new(false),
    };
    let total = cfg.total_train_steps;
    let throttle = (cfg.max_samples_per_train > 0.0).then(|| Throttle {
        base: agent.hp.warmup_steps.max(agent.hp.batch_size) as u64,
        ratio: cfg.max_samples_per_train,
    });
    let throttle = throttle.as_ref();

    let (result, publications, rows) = thread::scope(|scope| {
        let handles: Vec<_> = envs
            .into_iter()
            .enumerate()
            .map(|(i, env)| {
                let shared = &shared;
                let rng = stream_rng(cfg.seed, 1 + i as u64);
                scope.spawn(move || sampler_loop(shared, env, noise, rng, total, throttle))
            })
            .collect();
        let _guard = StopOnDrop(&shared.stop);

        let mut batch_rng = stream_rng(cfg.seed, 0);
        let mut publications = 0u64;
        let mut rows = Vec::new();
        let mut iter = 0u64;
        let trained = (|| -> Result<(), RunError> {
            while iter < total {
                if let Some(i) = handles.iter().position(|h| h.is_finished()) {
                    // a sampler only exits early on error or panic
                    shared.stop.store(true, Ordering::SeqCst);
                    return Err(RunError::SamplerPanic {
                        index: i,
                        message: "exited before the run finished".into(),
                    });
                }
                let (sampled, mean_return) = {
                    let replay = shared.replay.lock().unwrap_or_else(|e| e.into_inner());
                    (
                        replay.buffer.sample(agent.hp.batch_size, &mut batch_rng).ok(),
                        mean_recent(&replay.returns),
                    )
                };
                let Some(ts) = sampled else {
                    thread::sleep(IDLE_SLEEP);
                    continue;
                };
                let stats = agent.train_step(&Batch::from_transitions(&ts).map_err(DdpgError::from)?)?;
                iter += 1;
                shared.train_iterations.store(iter, Ordering::SeqCst);
                if iter % cfg.snapshot_interval == 0 {
                    *shared.snapshot.write().unwrap_or_else(|e| e.into_inner()) = publish_snapshot(&agent.actor);
                    publications += 1;
                }
                let row = MetricsRow {
                    iter,
                    samples: shared.samples.load(Ordering::SeqCst),
                    mean_q: stats.mean_q,
                    mean_return,
                    wall_s: start.elapsed().as_secs_f64(),
                };
                observer.on_row(&row)?;
                rows.push(row);
                if cfg.checkpoint_interval > 0 && iter % cfg.checkpoint_interval == 0 {
                    observer.on_checkpoint(iter, &agent)?;
                }
            }
            Ok(())
        })();
        shared.stop.store(true, Ordering::SeqCst);

        let mut sampler_err = None;
        for (index, h) in handles.into_iter().enumerate() {
            let err = match h.join() {
                Ok(Ok(())) => None,
                Ok(Err(e)) => Some(RunError::Sampler {
                    index,
                    source: Box::new(e),
                }),
                Err(payload) => Some(RunError::SamplerPanic {
                    index,
                    message: panic_message(payload),
                }),
            };
            if sampler_err.is_none() {
                sampler_err = err;
            }
        }
        // a sampler failure explains an early trainer exit better than the
        // generic "exited" message
        let result = match (trained, sampler_err) {
            (Ok(()), None) => Ok(()),
            (Err(RunError::SamplerPanic { .. }), Some(e)) => Err(e),
            (Err(e), _) => Err(e),
            (Ok(()), Some(e)) => Err(e),
        };
        (result, publications, rows)
    });
    result?;
    let counters = RunCounters {
        samples_collected: shared.samples.load(Ordering::SeqCst),
        train_iterations: shared.train_iterations.load(Ordering::SeqCst),
        episodes: shared.episodes.load(Ordering::SeqCst),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        agent,
        counters,
        publications,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Step;

    #[test]
    fn header_only_log() {
        let log = MetricsLog::new(Vec::new()).unwrap();
        assert_eq!(String::from_utf8(log.into_inner()).unwrap(), "iter,samples,mean_q,mean_return,wall_s\n");
    }

    #[test]
    fn row_format() {
        let mut log = MetricsLog::new(Vec::new()).unwrap();
        let row = MetricsRow {
            iter: 3,
            samples: 70,
            mean_q: -0.25,
            mean_return: f64::NAN,
            wall_s: 0.0,
        };
        log_progress(&mut log, &row).unwrap();
        let text = String::from_utf8(log.into_inner()).unwrap();
        assert_eq!(text.lines().nth(1), Some("3,70,-0.25,NaN,0"));
    }

    #[test]
    fn sigma_schedule() {
        let n = NoiseConfig::default();
        assert_eq!(n.sigma_at(0, 100), 0.2);
        assert!((n.sigma_at(50, 100) - 0.125).abs() < 1e-15);
        assert!((n.sigma_at(100, 100) - 0.05).abs() < 1e-15);
        assert_eq!(n.sigma_at(5, 0), 0.2);
    }

    #[test]
    fn config_validation() {
        let bad = RunConfig {
            n_samplers: 0,
            ..RunConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "n_samplers");
        let bad = RunConfig {
            snapshot_interval: 0,
            ..RunConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "snapshot_interval");
    }

    struct Line {
        x: f64,
        t: usize,
    }

    impl Environment for Line {
        fn obs_dim(&self) -> usize {
            1
        }
        fn action_dim(&self) -> usize {
            1
        }
        fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EnvError> {
            self.x = 0.0;
            self.t = 0;
            Ok(vec![0.0])
        }
        fn step(&mut self, a: &[f64]) -> Result<Step, EnvError> {
            self.x += a[0];
            self.t += 1;
            Ok(Step {
                obs: vec![self.x],
                reward: -self.x.abs(),
                terminal: false,
                truncated: self.t == 5,
            })
        }
    }

    #[test]
    fn sampler_episode_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = Actor::symmetric(1, &[4], 1, 1.0, &mut rng).unwrap();
        let mut s = Sampler::new(Line { x: 0.0, t: 0 }, &NoiseConfig::default(), rng);
        let mut total = 0.0;
        for k in 0..5 {
            let c = s.collect(&actor, 0.2).unwrap();
            assert!(!c.transition.done);
            total += c.transition.r;
            assert_eq!(c.finished_return.is_some(), k == 4);
            if let Some(r) = c.finished_return {
                assert_eq!(r, total);
            }
        }
        assert!(s.obs.is_none());
        assert!(s.noise.state.iter().all(|&x| x == 0.0));
    }
}
