use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::geometry::Point;
use super::kinematics::RobotState;
use super::world::WorldSpec;

/// Sparse planar range sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarSpec {
    pub n_beams: usize,
    /// radians, robot frame
    pub fov_min: f64,
    pub fov_max: f64,
    pub max_range: f64,
    pub min_range: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            n_beams: 10,
            fov_min: -FRAC_PI_2,
            fov_max: FRAC_PI_2,
            max_range: 10.0,
            min_range: 0.05,
        }
    }
}

impl LidarSpec {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.n_beams < 2 {
            return Err(("n_beams", format!("must be at least 2, got {}", self.n_beams)));
        }
        if !(self.fov_min.is_finite() && self.fov_max.is_finite() && self.fov_min < self.fov_max) {
            return Err(("fov_max", "must be finite and above fov_min".into()));
        }
        if !(self.min_range.is_finite() && 0.0 <= self.min_range) {
            return Err(("min_range", format!("must be non-negative, got {}", self.min_range)));
        }
        if !(self.max_range.is_finite() && self.min_range < self.max_range) {
            return Err(("max_range", "must be finite and above min_range".into()));
        }
        Ok(())
    }

    /// Beam directions in the robot frame: `n_beams` equally spaced values
    /// spanning `[fov_min, fov_max]` inclusive.
    pub fn beam_angles(&self) -> Vec<f64> {
        let step = (self.fov_max - self.fov_min) / (self.n_beams - 1) as f64;
        (0..self.n_beams).map(|i| self.fov_min + step * i as f64).collect()
    }
}

/// Distance to the nearest wall or obstacle edge along a world-frame ray,
/// clamped to `[min_range, max_range]`.
pub fn cast_ray(world: &WorldSpec, origin: Point, angle: f64, spec: &LidarSpec) -> f64 {
    let (s, c) = angle.sin_cos();
    let dir = Point::new(c, s);
    let nearest = world
        .segments()
        .iter()
        .filter_map(|seg| seg.ray_hit(origin, dir))
        .fold(f64::INFINITY, f64::min);
    nearest.clamp(spec.min_range, spec.max_range)
}

/// Normalized ranges (each `cast_ray / max_range`) for every beam.
pub fn scan(world: &WorldSpec, robot: &RobotState, spec: &LidarSpec) -> Vec<f64> {
    let origin = robot.position();
    spec.beam_angles()
        .into_iter()
        .map(|a| cast_ray(world, origin, robot.theta + a, spec) / spec.max_range)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::geometry::Polygon;
    use crate::sim::world::Rect;

    #[test]
    fn empty_room_center() {
        let world = WorldSpec::empty(10.0, 10.0);
        let spec = LidarSpec::default();
        assert!((cast_ray(&world, Point::new(5.0, 5.0), 0.0, &spec) - 5.0).abs() < 1e-12);
        let robot = RobotState::new(5.0, 5.0, 0.0);
        let beams = scan(&world, &robot, &spec);
        assert_eq!(beams.len(), 10);
        // beams at ±90° hit the side walls 5 m away
        assert!((beams[0] - 0.5).abs() < 1e-12);
        assert!((beams[9] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn forward_beam_with_odd_count() {
        let world = WorldSpec::empty(10.0, 10.0);
        let spec = LidarSpec {
            n_beams: 11,
            ..LidarSpec::default()
        };
        let beams = scan(&world, &RobotState::new(5.0, 5.0, 0.0), &spec);
        assert!((beams[5] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clamps_to_max_range() {
        let world = WorldSpec::empty(100.0, 100.0);
        let spec = LidarSpec::default();
        assert_eq!(cast_ray(&world, Point::new(50.0, 50.0), 1.0, &spec), 10.0);
        let beams = scan(&world, &RobotState::new(50.0, 50.0, 0.3), &spec);
        assert!(beams.iter().all(|&b| b == 1.0));
    }

    #[test]
    fn clamps_to_min_range() {
        let spawn = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };
        let world = WorldSpec::new(10.0, 10.0, vec![Polygon::rect(5.01, 4.0, 6.0, 6.0)], spawn, 0.3).unwrap();
        assert_eq!(cast_ray(&world, Point::new(5.0, 5.0), 0.0, &LidarSpec::default()), 0.05);
    }

    #[test]
    fn beam_angles_span_fov() {
        let a = LidarSpec::default().beam_angles();
        assert_eq!(a[0], -FRAC_PI_2);
        assert!((a[9] - FRAC_PI_2).abs() < 1e-15);
        assert!((a[1] - a[0] - std::f64::consts::PI / 9.0).abs() < 1e-15);
    }
}
