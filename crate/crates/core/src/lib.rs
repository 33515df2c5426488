//! Mapless motion planning: a 2D lidar simulator, DDPG with decoupled
//! sample collection, a Gaussian-process upsampling baseline and
//! waypoint evaluation.

pub mod nn;
pub mod env;
pub mod sim;
pub mod ddpg;
pub mod runner;
pub mod pendulum;
pub mod gp;
pub mod eval;
pub mod config;
