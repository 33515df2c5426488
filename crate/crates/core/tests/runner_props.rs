//! Training runner contracts: determinism, bookkeeping, liveness, failures.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mapless::ddpg::{Actor, Critic, Ddpg, Hyperparams};
use mapless::env::{EnvError, Environment, Step};
use mapless::runner::{
    log_progress, publish_snapshot, run_training, MetricsLog, MetricsRow, Mode, NoiseConfig, NullObserver, RunConfig,
    RunError, TrainingObserver,
};
use mapless::sim::{bundled, EpisodeConfig, LidarSpec, NavEnv, RewardConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_agent(seed: u64) -> Ddpg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = Actor::navigation(14, &[16, 16], 0.5, 1.0, &mut rng).unwrap();
    let critic = Critic::init(14, 2, &[16, 16], 1, &mut rng).unwrap();
    let hp = Hyperparams {
        batch_size: 8,
        warmup_steps: 32,
        buffer_capacity: 1000,
        lr_actor: 1e-3,
        lr_critic: 1e-3,
        ..Hyperparams::default()
    };
    Ddpg::new(actor, critic, hp).unwrap()
}

fn nav_env() -> NavEnv {
    NavEnv::new(
        Arc::new(bundled::env1()),
        LidarSpec::default(),
        RewardConfig::default(),
        EpisodeConfig {
            max_steps: 50,
            ..EpisodeConfig::default()
        },
    )
}

/// Wraps an environment and counts `step` calls.
struct Counting<E> {
    inner: E,
    steps: Arc<AtomicU64>,
}

impl<E: Environment> Environment for Counting<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EnvError> {
        self.inner.reset(rng)
    }
    fn step(&mut self, a: &[f64]) -> Result<Step, EnvError> {
        self.steps.fetch_add(1, Ordering::SeqCst);
        self.inner.step(a)
    }
}

struct CsvObserver(MetricsLog<Vec<u8>>);

impl TrainingObserver for CsvObserver {
    fn on_row(&mut self, row: &MetricsRow) -> Result<(), RunError> {
        Ok(log_progress(&mut self.0, row)?)
    }
}

fn sync_cfg(steps: u64, k: usize) -> RunConfig {
    RunConfig {
        mode: Mode::Sync,
        sync_env_steps_per_train: k,
        total_train_steps: steps,
        seed: 11,
        ..RunConfig::default()
    }
}

#[test]
fn sync_runs_are_bit_identical() {
    let run = || {
        let mut obs = CsvObserver(MetricsLog::new(Vec::new()).unwrap());
        let out = run_training(|_| Ok(nav_env()), small_agent(3), &NoiseConfig::default(), &sync_cfg(150, 1), &mut obs)
            .unwrap();
        (obs.0.into_inner(), out.agent.actor.net().flat_params(), out.agent.critic.net().flat_params())
    };
    let (log_a, actor_a, critic_a) = run();
    let (log_b, actor_b, critic_b) = run();
    assert_eq!(log_a, log_b);
    assert_eq!(String::from_utf8(log_a).unwrap().lines().count(), 151);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&actor_a), bits(&actor_b));
    assert_eq!(bits(&critic_a), bits(&critic_b));
}

#[test]
fn sync_sample_accounting() {
    let k = 3;
    let steps = Arc::new(AtomicU64::new(0));
    let s = Arc::clone(&steps);
    let out = run_training(
        move |_| {
            Ok(Counting {
                inner: nav_env(),
                steps: Arc::clone(&s),
            })
        },
        small_agent(4),
        &NoiseConfig::default(),
        &sync_cfg(40, k),
        &mut NullObserver,
    )
    .unwrap();
    assert_eq!(out.counters.train_iterations, 40);
    assert_eq!(out.rows.len(), 40);
    assert_eq!(out.counters.samples_collected, steps.load(Ordering::SeqCst));
    // warmup of 32 needs 11 rounds of 3 steps before the first update
    assert_eq!(out.rows[0].samples, 33);
    for w in out.rows.windows(2) {
        assert_eq!(w[1].samples - w[0].samples, k as u64);
        assert_eq!(w[1].iter, w[0].iter + 1);
    }
    assert_eq!(out.counters.samples_collected, 33 + 39 * 3);
}

#[test]
fn zero_steps_leave_agent_unchanged() {
    for mode in [Mode::Sync, Mode::Async] {
        let agent = small_agent(5);
        let before = agent.actor.net().flat_params();
        let cfg = RunConfig {
            mode,
            total_train_steps: 0,
            ..RunConfig::default()
        };
        let out = run_training(|_| Ok(nav_env()), agent, &NoiseConfig::default(), &cfg, &mut NullObserver).unwrap();
        assert_eq!(out.counters.train_iterations, 0);
        assert!(out.rows.is_empty());
        assert_eq!(out.agent.actor.net().flat_params(), before);
    }
}

#[test]
fn async_counts_every_step_and_publication() {
    for (interval, expected) in [(1u64, 30u64), (4, 7)] {
        let steps = Arc::new(AtomicU64::new(0));
        let s = Arc::clone(&steps);
        let cfg = RunConfig {
            mode: Mode::Async,
            n_samplers: 2,
            total_train_steps: 30,
            snapshot_interval: interval,
            seed: 2,
            ..RunConfig::default()
        };
        let out = run_training(
            move |_| {
                Ok(Counting {
                    inner: nav_env(),
                    steps: Arc::clone(&s),
                })
            },
            small_agent(6),
            &NoiseConfig::default(),
            &cfg,
            &mut NullObserver,
        )
        .unwrap();
        assert_eq!(out.counters.train_iterations, 30);
        assert_eq!(out.publications, expected);
        assert_eq!(out.counters.samples_collected, steps.load(Ordering::SeqCst));
        assert!(out.counters.samples_collected >= 32);
        for w in out.rows.windows(2) {
            assert!(w[1].samples >= w[0].samples);
            assert!(w[1].wall_s >= w[0].wall_s);
        }
    }
}

/// Sleeps on every row, standing in for a slow trainer.
struct Sleepy(Vec<u64>);

impl TrainingObserver for Sleepy {
    fn on_row(&mut self, row: &MetricsRow) -> Result<(), RunError> {
        self.0.push(row.samples);
        thread::sleep(Duration::from_millis(50));
        Ok(())
    }
}

#[test]
fn samplers_progress_while_trainer_sleeps() {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let cfg = RunConfig {
            mode: Mode::Async,
            n_samplers: 1,
            total_train_steps: 6,
            seed: 1,
            ..RunConfig::default()
        };
        let mut obs = Sleepy(Vec::new());
        let out = run_training(|_| Ok(nav_env()), small_agent(7), &NoiseConfig::default(), &cfg, &mut obs);
        tx.send((out.map(|o| o.counters), obs.0)).unwrap();
    });
    let (counters, seen) = rx.recv_timeout(Duration::from_secs(60)).expect("watchdog: run did not finish");
    let counters = counters.unwrap();
    assert_eq!(counters.train_iterations, 6);
    assert!(seen.windows(2).all(|w| w[1] > w[0]), "no sampler progress between rows: {seen:?}");
}

struct Faulty {
    inner: NavEnv,
    left: u32,
    panic: bool,
}

impl Environment for Faulty {
    fn obs_dim(&self) -> usize {
        14
    }
    fn action_dim(&self) -> usize {
        2
    }
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EnvError> {
        self.inner.reset(rng)
    }
    fn step(&mut self, a: &[f64]) -> Result<Step, EnvError> {
        if self.left == 0 {
            if self.panic {
                panic!("simulated sampler crash");
            }
            return Err(EnvError::Infeasible("simulated failure".into()));
        }
        self.left -= 1;
        self.inner.step(a)
    }
}

#[test]
fn sampler_failures_abort_the_run() {
    for panic in [true, false] {
        let cfg = RunConfig {
            mode: Mode::Async,
            total_train_steps: 1000,
            ..RunConfig::default()
        };
        let make = move |_| {
            Ok(Faulty {
                inner: nav_env(),
                left: 100,
                panic,
            })
        };
        let err = run_training(make, small_agent(8), &NoiseConfig::default(), &cfg, &mut NullObserver)
            .err()
            .expect("run should fail");
        match (panic, &err) {
            (true, RunError::SamplerPanic { message, .. }) => assert!(message.contains("simulated sampler crash")),
            (false, RunError::Sampler { source, .. }) => assert!(matches!(**source, RunError::Env(_))),
            _ => panic!("unexpected error {err:?}"),
        }
    }
}

struct Broken;

impl TrainingObserver for Broken {
    fn on_row(&mut self, _row: &MetricsRow) -> Result<(), RunError> {
        Err(std::io::Error::other("disk full").into())
    }
}

#[test]
fn sink_failure_aborts() {
    for mode in [Mode::Sync, Mode::Async] {
        let cfg = RunConfig {
            mode,
            total_train_steps: 10,
            ..RunConfig::default()
        };
        let err = run_training(|_| Ok(nav_env()), small_agent(9), &NoiseConfig::default(), &cfg, &mut Broken).err();
        assert!(matches!(err, Some(RunError::Sink(_))), "{mode:?}");
    }
}

#[test]
fn snapshot_is_a_deep_copy() {
    let mut agent = small_agent(10);
    let snap = publish_snapshot(&agent.actor);
    let obs = vec![0.5; 14];
    let before = snap.act(&obs, None).unwrap();
    assert_eq!(before, agent.actor.act(&obs, None).unwrap());
    for s in agent.actor.net_mut().param_slices_mut() {
        s.iter_mut().for_each(|x| *x += 0.1);
    }
    assert_eq!(snap.act(&obs, None).unwrap(), before);
    assert_ne!(agent.actor.act(&obs, None).unwrap(), before);
}

#[test]
fn throttle_caps_samples_per_train_step() {
    let cfg = RunConfig {
        mode: Mode::Async,
        n_samplers: 2,
        total_train_steps: 200,
        max_samples_per_train: 1.5,
        seed: 4,
        ..RunConfig::default()
    };
    let agent = small_agent(8);
    let base = agent.hp.warmup_steps.max(agent.hp.batch_size) as f64;
    let out = run_training(|_| Ok(nav_env()), agent, &NoiseConfig::default(), &cfg, &mut NullObserver).unwrap();
    assert_eq!(out.counters.train_iterations, 200);
    for row in &out.rows {
        let cap = base + 1.5 * row.iter as f64 + cfg.n_samplers as f64;
        assert!(row.samples as f64 <= cap, "iter {} samples {} cap {cap}", row.iter, row.samples);
    }
    assert!(out.counters.samples_collected as f64 <= base + 1.5 * 200.0 + 2.0);
}
