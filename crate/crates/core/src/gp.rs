//! RBF-kernel Gaussian process regression over beam angles, used to turn a
//! sparse range scan into a dense one.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// radians
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    /// radians, centered on the robot heading
    pub out_fov: f64,
    pub out_beams: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            lengthscale: 10f64.to_radians(),
            signal_var: 1.0,
            noise_var: 1e-4,
            out_fov: 270.0 * PI / 180.0,
            out_beams: 810,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(("lengthscale", format!("must be positive, got {}", self.lengthscale)));
        }
        if !(self.signal_var > 0.0 && self.signal_var.is_finite()) {
            return Err(("signal_var", format!("must be positive, got {}", self.signal_var)));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(("noise_var", format!("must be non-negative, got {}", self.noise_var)));
        }
        if !(self.out_fov > 0.0 && self.out_fov <= 2.0 * PI) {
            return Err(("out_fov", format!("must be in (0, 2π], got {}", self.out_fov)));
        }
        if self.out_beams < 2 {
            return Err(("out_beams", "must be at least 2".into()));
        }
        Ok(())
    }

    /// Equally spaced query angles from `-out_fov/2` to `out_fov/2`.
    pub fn query_angles(&self) -> Vec<f64> {
        let n = self.out_beams;
        let half = self.out_fov / 2.0;
        (0..n)
            .map(|i| -half + self.out_fov * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("{0}")]
    Input(String),
    #[error("kernel matrix is not positive definite; increase noise_var")]
    NotPositiveDefinite,
    #[error("invalid GP config: {key}: {msg}")]
    Config { key: &'static str, msg: String },
}

pub fn rbf_kernel(a: f64, b: f64, cfg: &GpConfig) -> f64 {
    let d = a - b;
    cfg.signal_var * (-d * d / (2.0 * cfg.lengthscale * cfg.lengthscale)).exp()
}

/// Fitted posterior: the weights `(K + σ_n²I)⁻¹(y − ȳ)` and the data mean.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    angles: Vec<f64>,
    weights: Vec<f64>,
    mean: f64,
    cfg: GpConfig,
}

impl GpPosterior {
    pub fn fit(angles: &[f64], values: &[f64], cfg: &GpConfig) -> Result<Self, GpError> {
        cfg.validate().map_err(|(key, msg)| GpError::Config { key, msg })?;
        if angles.len() != values.len() {
            return Err(GpError::Input(format!(
                "{} angles but {} values",
                angles.len(),
                values.len()
            )));
        }
        if angles.is_empty() {
            return Err(GpError::Input("no training points".into()));
        }
        if angles.iter().chain(values).any(|x| !x.is_finite()) {
            return Err(GpError::Input("non-finite input".into()));
        }
        for (i, a) in angles.iter().enumerate() {
            if angles[..i].contains(a) {
                return Err(GpError::Input(format!("duplicate input angle {a}")));
            }
        }
        let n = angles.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            rbf_kernel(angles[i], angles[j], cfg) + if i == j { cfg.noise_var } else { 0.0 }
        });
        let chol = k.cholesky().ok_or(GpError::NotPositiveDefinite)?;
        let mean = values.iter().sum::<f64>() / n as f64;
        let centered = DVector::from_iterator(n, values.iter().map(|v| v - mean));
        Ok(Self {
            angles: angles.to_vec(),
            weights: chol.solve(&centered).iter().copied().collect(),
            mean,
            cfg: cfg.clone(),
        })
    }

    pub fn predict(&self, a: f64) -> f64 {
        self.mean
            + self
                .angles
                .iter()
                .zip(&self.weights)
                .map(|(&x, w)| rbf_kernel(a, x, &self.cfg) * w)
                .sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// Posterior mean at each of `cfg.out_beams` query angles.
pub fn gp_upsample(angles_in: &[f64], ranges_in: &[f64], cfg: &GpConfig) -> Result<Vec<f64>, GpError> {
    let post = GpPosterior::fit(angles_in, ranges_in, cfg)?;
    Ok(cfg.query_angles().into_iter().map(|a| post.predict(a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let cfg = GpConfig {
            signal_var: 2.5,
            ..GpConfig::default()
        };
        assert_eq!(rbf_kernel(0.3, 0.3, &cfg), 2.5);
        let l = cfg.lengthscale;
        assert!((rbf_kernel(0.1, 0.1 + l, &cfg) - 2.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(rbf_kernel(0.1, 0.7, &cfg), rbf_kernel(0.7, 0.1, &cfg));
    }

    #[test]
    fn query_grid() {
        let q = GpConfig::default().query_angles();
        assert_eq!(q.len(), 810);
        assert!((q[0] + 135f64.to_radians()).abs() < 1e-12);
        assert!((q[809] - 135f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn singular_kernel_reports_noise_hint() {
        let cfg = GpConfig {
            noise_var: 0.0,
            lengthscale: 100.0,
            ..GpConfig::default()
        };
        let err = GpPosterior::fit(&[0.0, 1e-9, 2e-9], &[1.0, 2.0, 3.0], &cfg).unwrap_err();
        assert!(matches!(err, GpError::NotPositiveDefinite));
        assert!(err.to_string().contains("noise_var"));
    }

    #[test]
    fn bad_inputs() {
        let cfg = GpConfig::default();
        assert!(GpPosterior::fit(&[0.0, 0.0], &[1.0, 2.0], &cfg).is_err());
        assert!(GpPosterior::fit(&[0.0], &[1.0, 2.0], &cfg).is_err());
        assert!(GpPosterior::fit(&[], &[], &cfg).is_err());
        let bad = GpConfig {
            out_beams: 1,
            ..GpConfig::default()
        };
        assert!(matches!(GpPosterior::fit(&[0.0], &[1.0], &bad), Err(GpError::Config { key: "out_beams", .. })));
    }
}
