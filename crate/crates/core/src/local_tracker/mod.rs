//! Per-robot tracker: constant-velocity Kalman filter, Mahalanobis-gated
//! global-nearest-neighbour association and track lifecycle.

mod hungarian;
mod kalman;
mod tracker;

pub use hungarian::{hungarian, Assignment};
pub use kalman::{
    kf_predict, kf_update, mahalanobis_sq, measurement_matrix, process_noise, transition, ModelParams, StateEstimate,
    TrackerConfig,
};
pub use tracker::{
    associate, track_lifecycle_step, Association, LocalTracker, Track, TrackId, TrackStatus,
    GATE_SENTINEL_SCALE,
};
