use std::f64::consts::{PI, TAU};

use super::geometry::Point;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - TAU * ((a - PI) / TAU).ceil();
    // guard against rounding landing exactly on -π
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Planar pose of a differential-drive robot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// radians in (-π, π]
    pub theta: f64,
    pub radius: f64,
}

impl RobotState {
    pub const DEFAULT_RADIUS: f64 = 0.18;

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            radius: Self::DEFAULT_RADIUS,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Unicycle motion under constant `(v, w)` for `dt`, integrated exactly
/// along the circular arc.
pub fn step_kinematics(state: &RobotState, v: f64, w: f64, dt: f64) -> RobotState {
    let th = state.theta;
    let (x, y) = if w.abs() > 1e-9 {
        let th2 = th + w * dt;
        (
            state.x + v / w * (th2.sin() - th.sin()),
            state.y + v / w * (th.cos() - th2.cos()),
        )
    } else {
        (state.x + v * dt * th.cos(), state.y + v * dt * th.sin())
    };
    RobotState {
        x,
        y,
        theta: wrap_angle(th + w * dt),
        radius: state.radius,
    }
}

/// Distance and robot-frame bearing of `target`; the bearing is 0 when
/// the target coincides with the robot.
pub fn relative_target_polar(robot: &RobotState, target: Point) -> (f64, f64) {
    let dx = target.x - robot.x;
    let dy = target.y - robot.y;
    let d = dx.hypot(dy);
    if d == 0.0 {
        return (0.0, 0.0);
    }
    (d, wrap_angle(dy.atan2(dx) - robot.theta))
}
