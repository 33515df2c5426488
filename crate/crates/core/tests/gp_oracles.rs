//! Posterior-mean checks against a dense direct evaluation.

mod common;

use common::direct_mean;
use mapless::gp::{gp_upsample, GpConfig, GpPosterior};
use proptest::prelude::*;

fn beam_angles() -> Vec<f64> {
    (0..10).map(|i| (-90.0 + 20.0 * i as f64).to_radians()).collect()
}

#[test]
fn three_point_toy_matches_direct_formula() {
    let cfg = GpConfig {
        lengthscale: 0.4,
        signal_var: 1.3,
        noise_var: 0.01,
        ..GpConfig::default()
    };
    let xs = [-0.5, 0.1, 0.6];
    let ys = [0.8, 0.3, 0.55];
    let post = GpPosterior::fit(&xs, &ys, &cfg).unwrap();
    for q in [-2.0, -0.5, -0.2, 0.0, 0.33, 0.6, 1.7] {
        let want = direct_mean(&xs, &ys, q, &cfg);
        assert!((post.predict(q) - want).abs() <= 1e-10, "at {q}: {} vs {want}", post.predict(q));
    }
}

#[test]
fn noise_free_interpolates_inputs() {
    let cfg = GpConfig {
        noise_var: 0.0,
        ..GpConfig::default()
    };
    let xs = beam_angles();
    let ys = [0.2, 0.35, 0.9, 1.0, 0.41, 0.43, 0.7, 0.12, 0.3, 0.95];
    let post = GpPosterior::fit(&xs, &ys, &cfg).unwrap();
    for (x, y) in xs.iter().zip(ys) {
        assert!((post.predict(*x) - y).abs() <= 1e-6);
    }
    let dense = gp_upsample(&xs, &ys, &cfg).unwrap();
    assert_eq!(dense.len(), 810);
}

#[test]
fn symmetric_inputs_give_symmetric_output() {
    let cfg = GpConfig::default();
    let xs = beam_angles();
    let half = [0.3, 0.8, 0.55, 0.2, 0.9];
    let ys: Vec<f64> = half.iter().chain(half.iter().rev()).copied().collect();
    let dense = gp_upsample(&xs, &ys, &cfg).unwrap();
    for i in 0..dense.len() {
        assert!((dense[i] - dense[dense.len() - 1 - i]).abs() <= 1e-9);
    }
}

#[test]
fn far_queries_revert_to_mean() {
    let cfg = GpConfig::default();
    let xs = beam_angles();
    let ys: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
    let post = GpPosterior::fit(&xs, &ys, &cfg).unwrap();
    let far = 90f64.to_radians() + 5.0 * cfg.lengthscale + 1e-3;
    for q in [far, -far, 3.0, -3.0] {
        assert!((post.predict(q) - post.mean()).abs() <= 1e-3 * cfg.signal_var);
    }
}

#[test]
fn joint_variance_scaling_leaves_mean() {
    let xs = beam_angles();
    let ys = [0.2, 0.35, 0.9, 1.0, 0.41, 0.43, 0.7, 0.12, 0.3, 0.95];
    let base = GpConfig::default();
    let scaled = GpConfig {
        signal_var: 2.0 * base.signal_var,
        noise_var: 2.0 * base.noise_var,
        ..base.clone()
    };
    let a = gp_upsample(&xs, &ys, &base).unwrap();
    let b = gp_upsample(&xs, &ys, &scaled).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn output_shape_and_finiteness(ys in proptest::collection::vec(0.01..1.0f64, 10), beams in 2usize..1000) {
        let cfg = GpConfig { out_beams: beams, ..GpConfig::default() };
        let out = gp_upsample(&beam_angles(), &ys, &cfg).unwrap();
        prop_assert_eq!(out.len(), beams);
        prop_assert!(out.iter().all(|x| x.is_finite()));
    }
}
