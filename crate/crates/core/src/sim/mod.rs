//! 2D world, sparse lidar, unicycle kinematics and the navigation episode.

pub mod env;
pub mod geometry;
pub mod kinematics;
pub mod lidar;
pub mod reward;
pub mod world;

pub use env::{sample_free_pose, EpisodeConfig, Event, NavEnv, NavStep, Observation};
pub use geometry::{Point, Polygon, Segment};
pub use kinematics::{relative_target_polar, step_kinematics, wrap_angle, RobotState};
pub use lidar::{cast_ray, scan, LidarSpec};
pub use reward::{compute_reward, RewardConfig, Terminal};
pub use world::{bundled, Rect, WorldError, WorldSpec};
