//! Deterministic multi-robot multi-object tracking.
//!
//! Each simulated robot turns 2D lidar scans into clustered detections,
//! tracks them with a constant-velocity Kalman filter and Hungarian
//! global-nearest-neighbour association, and then fuses its tracks with
//! its neighbours' through a distributed Kalman-consensus step that can
//! weight neighbours by their reported localization uncertainty.
//! Everything runs on one logical clock and a seeded RNG, so a given
//! configuration always produces the same outputs.

pub mod config;
pub mod consensus;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod local_tracker;
pub mod logs;
pub mod netsim;
pub mod rng;
pub mod scenario_sim;

pub use error::{Error, Result};
pub use geometry::{Point2, Pose2D, RobotId};
