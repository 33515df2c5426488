//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use mapless::ddpg::{Actor, Batch, Critic, Transition};
use mapless::gp::{rbf_kernel, GpConfig};
use mapless::sim::{LidarSpec, Point, Polygon, Rect, RobotState, WorldSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_polygon(rng: &mut impl Rng, w: f64, h: f64) -> Polygon {
    let cx = rng.random_range(1.0..w - 1.0);
    let cy = rng.random_range(1.0..h - 1.0);
    if rng.random_bool(0.5) {
        let hw = rng.random_range(0.1..0.9);
        let hh = rng.random_range(0.1..0.9);
        Polygon::rect(cx - hw, cy - hh, cx + hw, cy + hh)
    } else {
        let r = rng.random_range(0.2..0.9);
        let a0 = rng.random_range(0.0..2.0 * PI);
        Polygon::new(
            (0..3)
                .map(|k| {
                    let a = a0 + k as f64 * 2.0 * PI / 3.0 + rng.random_range(-0.4..0.4);
                    Point::new(cx + r * a.cos(), cy + r * a.sin())
                })
                .collect(),
        )
    }
}

pub fn random_world(rng: &mut impl Rng) -> WorldSpec {
    let (w, h) = (10.0, 10.0);
    let n = rng.random_range(0..=4);
    let obstacles = (0..n).map(|_| random_polygon(rng, w, h)).collect();
    let spawn = Rect { x0: 0.0, y0: 0.0, x1: w, y1: h };
    WorldSpec::new(w, h, obstacles, spawn, 0.3).unwrap()
}

/// March along the ray in 1 mm steps until the point lands in an obstacle
/// or outside the walls.
pub fn ray_march(world: &WorldSpec, origin: Point, angle: f64, spec: &LidarSpec) -> f64 {
    let step = 1e-3;
    let (s, c) = angle.sin_cos();
    let n = (spec.max_range / step).ceil() as usize;
    for k in 1..=n {
        let t = k as f64 * step;
        let p = Point::new(origin.x + t * c, origin.y + t * s);
        let inside = p.x < 0.0
            || p.y < 0.0
            || p.x > world.width()
            || p.y > world.height()
            || world.obstacles().iter().any(|o| o.contains(p));
        if inside {
            return t.clamp(spec.min_range, spec.max_range);
        }
    }
    spec.max_range
}

/// Integrates the unicycle with `n` midpoint-heading Euler substeps.
pub fn fine_euler(start: &RobotState, v: f64, w: f64, dt: f64, n: usize) -> RobotState {
    let h = dt / n as f64;
    let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
    for _ in 0..n {
        // midpoint heading keeps the oracle second-order accurate
        let mid = th + 0.5 * w * h;
        x += v * h * mid.cos();
        y += v * h * mid.sin();
        th += w * h;
    }
    RobotState { x, y, theta: th, ..*start }
}

pub fn direct_mean(xs: &[f64], ys: &[f64], q: f64, cfg: &GpConfig) -> f64 {
    let n = xs.len();
    // explicit inverse through LU, not the Cholesky path under test
    let k = DMatrix::from_fn(n, n, |i, j| {
        rbf_kernel(xs[i], xs[j], cfg) + if i == j { cfg.noise_var } else { 0.0 }
    });
    let inv = k.try_inverse().unwrap();
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let mut m = ybar;
    for i in 0..n {
        for j in 0..n {
            m += rbf_kernel(q, xs[i], cfg) * inv[(i, j)] * (ys[j] - ybar);
        }
    }
    m
}

pub fn random_setup(seed: u64, n: usize) -> (Actor, Critic, Batch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = rng.random_range(2..6);
    let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(2..8)).collect();
    let merge = rng.random_range(0..hidden.len() + 1);
    let mut actor = Actor::navigation(obs, &hidden, 0.5, 1.0, &mut rng).unwrap();
    let mut critic = Critic::init(obs, 2, &hidden, merge, &mut rng).unwrap();
    for net in [actor.net_mut(), critic.net_mut()] {
        for s in net.param_slices_mut() {
            s.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
    }
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            s: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            a: vec![rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)],
            r: rng.random_range(-1.0..1.0),
            s_next: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: rng.random_bool(0.2),
        })
        .collect();
    (actor, critic, Batch::from_transitions(&ts).unwrap())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

