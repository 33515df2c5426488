use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use mapless::config::Config;
use mapless::ddpg::{checkpoint, Actor, Ddpg};
use mapless::eval::{self, EvalSetup, WaypointTask};
use mapless::gp::gp_upsample;
use mapless::pendulum::{self, CompareOptions};
use mapless::runner::{log_progress, run_training, MetricsLog, MetricsRow, Mode, RunError, TrainingObserver};
use mapless::sim::{bundled, cast_ray, sample_free_pose, scan, NavEnv, RobotState, WorldSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::out_dir;
use crate::{CompareArgs, EvalArgs, GpDemoArgs, LatencyArgs, TrainArgs};

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn load_world(path: Option<&Path>, fallback: fn() -> WorldSpec) -> Result<WorldSpec> {
    match path {
        Some(p) => WorldSpec::load(p).with_context(|| format!("loading world {}", p.display())),
        None => Ok(fallback()),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text).with_context(|| format!("writing {}", dir.join(name).display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

#[derive(Serialize)]
struct Manifest {
    command: Vec<String>,
    seed: u64,
    mode: Mode,
    total_train_steps: u64,
    world: String,
    config: String,
}

struct TrainSinks<'a> {
    metrics: MetricsLog<BufWriter<File>>,
    dir: &'a Path,
    quiet: bool,
}

impl TrainingObserver for TrainSinks<'_> {
    fn on_row(&mut self, row: &MetricsRow) -> Result<(), RunError> {
        log_progress(&mut self.metrics, row)?;
        if !self.quiet && row.iter % 100 == 0 {
            eprintln!(
                "iter {:>8}  samples {:>9}  mean_q {:>10.4}  mean_return {:>9.3}",
                row.iter, row.samples, row.mean_q, row.mean_return
            );
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, iter: u64, agent: &Ddpg) -> Result<(), RunError> {
        checkpoint::save(agent, self.dir.join("checkpoints").join(format!("iter_{iter:08}")))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct TrainSummary {
    train_iterations: u64,
    samples_collected: u64,
    episodes: u64,
    samples_per_iteration: f64,
    publications: u64,
    wall_time_s: f64,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.run.seed = seed;
    }
    if let Some(steps) = a.steps {
        cfg.run.total_train_steps = steps;
    }
    if a.sync {
        cfg.run.mode = Mode::Sync;
    }
    if a.async_mode {
        cfg.run.mode = Mode::Async;
    }
    if let Some(n) = a.samplers {
        cfg.run.n_samplers = n;
    }
    cfg.validate()?;
    let world = Arc::new(load_world(a.world.as_deref(), bundled::env1)?);
    let dir = out_dir::prepare(&a.out.out, a.out.force)?;

    write(&dir, "config.toml", &cfg.to_toml())?;
    write(&dir, "world.json", &world.to_json())?;
    let manifest = Manifest {
        command: std::env::args().collect(),
        seed: cfg.run.seed,
        mode: cfg.run.mode,
        total_train_steps: cfg.run.total_train_steps,
        world: a.world.as_ref().map_or("bundled:env1".into(), |p| p.display().to_string()),
        config: a.config.as_ref().map_or("defaults".into(), |p| p.display().to_string()),
    };
    write(&dir, "manifest.toml", &toml::to_string(&manifest)?)?;

    let agent = cfg.nav_agent(cfg.run.seed)?;
    let mut sinks = TrainSinks {
        metrics: MetricsLog::new(create(&dir, "metrics.csv")?)?,
        dir: &dir,
        quiet: a.out.quiet,
    };
    let make_env = |_| Ok(NavEnv::new(Arc::clone(&world), cfg.lidar.clone(), cfg.reward.clone(), cfg.episode.clone()));
    let out = run_training(make_env, agent, &cfg.noise, &cfg.run, &mut sinks)?;
    sinks.metrics.flush()?;
    checkpoint::save(&out.agent, dir.join("checkpoint"))?;
    let c = out.counters;
    let summary = TrainSummary {
        train_iterations: c.train_iterations,
        samples_collected: c.samples_collected,
        episodes: c.episodes,
        samples_per_iteration: c.samples_collected as f64 / c.train_iterations.max(1) as f64,
        publications: out.publications,
        wall_time_s: c.wall_time,
    };
    write(&dir, "summary.toml", &toml::to_string(&summary)?)?;
    if !a.out.quiet {
        eprintln!(
            "trained {} steps on {} samples in {:.1} s; checkpoint in {}",
            c.train_iterations,
            c.samples_collected,
            c.wall_time,
            dir.join("checkpoint").display()
        );
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let sibling = a.checkpoint.join("..").join("config.toml");
    let cfg = match (&a.config, sibling.is_file()) {
        (Some(p), _) => load_config(Some(p))?,
        (None, true) => load_config(Some(&sibling))?,
        (None, false) => Config::default(),
    };
    let world = Arc::new(load_world(a.world.as_deref(), bundled::test_7x10)?);
    let task = match &a.targets {
        Some(p) => WaypointTask::load(p).with_context(|| format!("loading targets {}", p.display()))?,
        None => WaypointTask::from_json(bundled::TEST_7X10_TARGETS)?,
    };
    let mut actor = eval::load_policy(&a.checkpoint).with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    if actor.obs_dim() != cfg.obs_dim() || actor.action_dim() != 2 {
        bail!(
            "checkpoint expects {} observations and {} actions; the config gives {} and 2",
            actor.obs_dim(),
            actor.action_dim(),
            cfg.obs_dim()
        );
    }
    let limits = [cfg.episode.v_max, cfg.episode.w_max];
    if actor.scale().iter().zip(limits).any(|(s, l)| *s > l) {
        bail!("checkpoint action scale {:?} exceeds the episode limits {limits:?}", actor.scale());
    }
    let setup = EvalSetup {
        world: Arc::clone(&world),
        lidar: cfg.lidar.clone(),
        reward: cfg.reward.clone(),
        episode: cfg.episode.clone(),
    };
    let dir = out_dir::prepare(&a.out.out, a.out.force)?;
    let out = eval::run_waypoint_eval(&task, &mut actor, &setup)?;
    eval::write_trajectory(&out.trajectory, create(&dir, "trajectory.csv")?)?;
    write(&dir, "report.toml", &out.report.to_toml())?;
    write(&dir, "report.csv", &format!("{}\n{}\n", eval::MetricsReport::CSV_HEADER, out.report.csv_row()))?;
    write(&dir, "config.toml", &cfg.to_toml())?;
    write(&dir, "world.json", &world.to_json())?;
    write(&dir, "targets.json", &task.to_json())?;
    if !a.out.quiet {
        print!("{}", out.report.to_toml());
    }
    Ok(())
}

pub fn pendulum_compare(a: CompareArgs) -> Result<()> {
    let opts = CompareOptions {
        seeds: (a.seed..a.seed + a.seeds).collect(),
        train_steps: a.steps,
        n_samplers: a.samplers,
        ..CompareOptions::default()
    };
    let dir = out_dir::prepare(&a.out.out, a.out.force)?;
    if !a.out.quiet {
        eprintln!("training {} seeds x 2 modes for {} steps each", opts.seeds.len(), opts.train_steps);
    }
    let report = pendulum::addpg_vs_ddpg_compare(&opts)?;
    report.write_dir(&dir)?;
    if !a.out.quiet {
        print!("{}", report.summary_toml());
    }
    Ok(())
}

pub fn gp_demo(a: GpDemoArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let world = load_world(a.world.as_deref(), bundled::env1)?;
    let robot = match a.pose {
        Some([x, y, t]) => RobotState::new(x, y, t),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let p = sample_free_pose(&world, &mut rng, world.min_clearance())?;
            RobotState::new(p.x, p.y, rand::Rng::random_range(&mut rng, -std::f64::consts::PI..std::f64::consts::PI))
        }
    };
    if world.is_blocked(robot.position()) {
        bail!("pose ({}, {}) is inside an obstacle or outside the world", robot.x, robot.y);
    }
    let dir = out_dir::prepare(&a.out.out, a.out.force)?;
    let angles = cfg.lidar.beam_angles();
    let sparse = scan(&world, &robot, &cfg.lidar);
    let dense = gp_upsample(&angles, &sparse, &cfg.gp)?;
    let max = cfg.lidar.max_range;

    let mut f = create(&dir, "input_scan.csv")?;
    writeln!(f, "angle_deg,range_m")?;
    for (a, r) in angles.iter().zip(&sparse) {
        writeln!(f, "{},{}", a.to_degrees(), r * max)?;
    }
    f.flush()?;
    let mut g = create(&dir, "gp_scan.csv")?;
    let mut t = create(&dir, "true_scan.csv")?;
    writeln!(g, "angle_deg,range_m")?;
    writeln!(t, "angle_deg,range_m")?;
    for (q, r) in cfg.gp.query_angles().iter().zip(&dense) {
        writeln!(g, "{},{}", q.to_degrees(), r * max)?;
        writeln!(t, "{},{}", q.to_degrees(), cast_ray(&world, robot.position(), robot.theta + q, &cfg.lidar))?;
    }
    g.flush()?;
    t.flush()?;
    write(&dir, "pose.toml", &format!("x = {}\ny = {}\ntheta = {}\n", robot.x, robot.y, robot.theta))?;
    Ok(())
}

#[derive(Serialize)]
struct LatencyOut {
    n_queries: usize,
    mean_s: f64,
    p99_s: f64,
    max_control_frequency_per_min: f64,
    hidden: Vec<usize>,
}

pub fn latency(a: LatencyArgs) -> Result<()> {
    let mut actor = match &a.checkpoint {
        Some(p) => eval::load_policy(p).with_context(|| format!("loading checkpoint {}", p.display()))?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            Actor::navigation(14, &[512, 512, 512], 0.5, 1.0, &mut rng)?
        }
    };
    if !(a.duration.is_finite() && a.duration >= 1.0) {
        bail!("--duration must be at least 1 second");
    }
    let dir = out_dir::prepare(&a.out.out, a.out.force)?;
    let obs_dim = actor.obs_dim();
    let hidden: Vec<usize> = actor.net().layers().iter().map(|l| l.outputs()).collect();
    let lat = eval::measure_query_latency(&mut actor, obs_dim, a.queries, a.seed)?;
    let freq = eval::max_control_frequency(&mut actor, obs_dim, Duration::from_secs_f64(a.duration), a.seed)?;
    let out = LatencyOut {
        n_queries: lat.n,
        mean_s: lat.mean_s,
        p99_s: lat.p99_s,
        max_control_frequency_per_min: freq,
        hidden: hidden[..hidden.len() - 1].to_vec(),
    };
    let text = toml::to_string(&out)?;
    write(&dir, "latency.toml", &text)?;
    if !a.out.quiet {
        print!("{text}");
    }
    Ok(())
}
