use std::fmt;

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use super::kalman::{kf_predict, kf_update, mahalanobis_sq, ModelParams, StateEstimate};
use crate::detection::Detection;
use crate::error::Result;
use crate::geometry::RobotId;

/// Gated-out pairs cost `GATE_SENTINEL_SCALE * gate_threshold`.
pub const GATE_SENTINEL_SCALE: f64 = 1e6;

/// Track identifier, unique across robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId {
    pub robot: RobotId,
    pub seq: u32,
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.robot, self.seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Dead => "dead",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: TrackId,
    pub estimate: StateEstimate,
    pub hits: u32,
    pub consecutive_misses: u32,
    pub status: TrackStatus,
    pub last_update_tick: u64,
    /// Detection associated on the most recent tick, if any.
    pub last_measurement: Option<Vector2<f64>>,
    /// Consecutive ticks with a consensus residual above threshold.
    pub mistrack_strikes: u32,
}

impl Track {
    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    fn kill(&mut self) {
        self.status = TrackStatus::Dead;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// (track index, detection index)
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Global-nearest-neighbour association of predicted tracks with
/// detections, gated on squared Mahalanobis distance.
pub fn associate(tracks: &[Track], detections: &[Detection], model: &ModelParams) -> Result<Association> {
    let (nt, nd) = (tracks.len(), detections.len());
    let sentinel = GATE_SENTINEL_SCALE * model.gate_threshold;
    let n = nt.max(nd);
    let mut cost = vec![vec![sentinel; n]; n];
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            let m2 = mahalanobis_sq(&t.estimate, &d.centroid, model)?;
            if m2 <= model.gate_threshold {
                cost[i][j] = m2;
            }
        }
    }
    let mut matched_t = vec![false; nt];
    let mut matched_d = vec![false; nd];
    let mut matches = Vec::new();
    for (i, j) in hungarian(&cost).pairs {
        if i < nt && j < nd && cost[i][j] < sentinel {
            matches.push((i, j));
            matched_t[i] = true;
            matched_d[j] = true;
        }
    }
    Ok(Association {
        matches,
        unmatched_tracks: (0..nt).filter(|&i| !matched_t[i]).collect(),
        unmatched_detections: (0..nd).filter(|&j| !matched_d[j]).collect(),
    })
}

/// Applies one tick of updates, misses, births and status changes.
///
/// `tracks` must already be predicted to `tick`. Dead tracks stay in the
/// returned list with status `Dead`; callers drop them.
pub fn track_lifecycle_step(
    mut tracks: Vec<Track>,
    assoc: &Association,
    detections: &[Detection],
    model: &ModelParams,
    tick: u64,
    robot: RobotId,
    next_seq: &mut u32,
) -> Result<Vec<Track>> {
    for t in &mut tracks {
        t.last_measurement = None;
    }
    for &(i, j) in &assoc.matches {
        let z = detections[j].centroid;
        let t = &mut tracks[i];
        t.estimate = kf_update(&t.estimate, &z, model)?;
        t.hits += 1;
        t.consecutive_misses = 0;
        t.last_update_tick = tick;
        t.last_measurement = Some(z);
    }
    for &i in &assoc.unmatched_tracks {
        let t = &mut tracks[i];
        t.consecutive_misses += 1;
        if t.consecutive_misses > model.max_misses {
            t.kill();
        }
    }
    for t in &mut tracks {
        if t.status == TrackStatus::Tentative && t.hits >= model.confirm_hits {
            t.status = TrackStatus::Confirmed;
        }
    }
    for &j in &assoc.unmatched_detections {
        let z = detections[j].centroid;
        tracks.push(Track {
            id: TrackId { robot, seq: *next_seq },
            estimate: StateEstimate::new(Vector4::new(z.x, 0.0, z.y, 0.0), model.initial_covariance()),
            hits: 0,
            consecutive_misses: 0,
            status: TrackStatus::Tentative,
            last_update_tick: tick,
            last_measurement: None,
            mistrack_strikes: 0,
        });
        *next_seq += 1;
    }
    Ok(tracks)
}

/// One robot's tracker.
#[derive(Debug, Clone)]
pub struct LocalTracker {
    robot: RobotId,
    model: ModelParams,
    tracks: Vec<Track>,
    next_seq: u32,
}

impl LocalTracker {
    pub fn new(robot: RobotId, model: ModelParams) -> Self {
        Self { robot, model, tracks: Vec::new(), next_seq: 0 }
    }

    pub fn robot(&self) -> RobotId {
        self.robot
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn tracks_mut(&mut self) -> &mut [Track] {
        &mut self.tracks
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.is_confirmed())
    }

    /// Predict, associate and update. Returns the tracks that died.
    pub fn step(&mut self, detections: &[Detection], tick: u64) -> Result<Vec<Track>> {
        for t in &mut self.tracks {
            t.estimate = kf_predict(&t.estimate, &self.model);
        }
        let assoc = associate(&self.tracks, detections, &self.model)?;
        let tracks = std::mem::take(&mut self.tracks);
        let all = track_lifecycle_step(tracks, &assoc, detections, &self.model, tick, self.robot, &mut self.next_seq)?;
        let (dead, live) = all.into_iter().partition(|t| t.status == TrackStatus::Dead);
        self.tracks = live;
        Ok(dead)
    }

    /// Removes tracks marked dead outside of `step` (mistrack removal).
    pub fn reap(&mut self) -> Vec<Track> {
        let tracks = std::mem::take(&mut self.tracks);
        let (dead, live) = tracks.into_iter().partition(|t| t.status == TrackStatus::Dead);
        self.tracks = live;
        dead
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_tracker::TrackerConfig;
    use nalgebra::Matrix4;

    fn model() -> ModelParams {
        ModelParams::new(
            0.1,
            &TrackerConfig {
                process_noise_intensity: 0.5,
                measurement_noise: [[0.01, 0.0], [0.0, 0.01]],
                gate_threshold: 9.21,
                init_pos_var: 0.25,
                init_vel_var: 1.0,
                max_misses: 5,
                confirm_hits: 3,
            },
        )
    }

    fn det(x: f64, y: f64) -> Detection {
        Detection { centroid: Vector2::new(x, y), frame: RobotId(0), tick: 0, support: 5 }
    }

    fn track_at(x: f64, y: f64, var: f64, seq: u32) -> Track {
        Track {
            id: TrackId { robot: RobotId(0), seq },
            estimate: StateEstimate::new(Vector4::new(x, 0.0, y, 0.0), Matrix4::identity() * var),
            hits: 0,
            consecutive_misses: 0,
            status: TrackStatus::Tentative,
            last_update_tick: 0,
            last_measurement: None,
            mistrack_strikes: 0,
        }
    }

    #[test]
    fn no_tracks_leaves_all_detections_unmatched() {
        let a = associate(&[], &[det(0.0, 0.0), det(1.0, 1.0)], &model()).unwrap();
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_detections, vec![0, 1]);
    }

    #[test]
    fn gated_pair_matches() {
        let a = associate(&[track_at(0.0, 0.0, 0.1, 0)], &[det(0.1, 0.0)], &model()).unwrap();
        assert_eq!(a.matches, vec![(0, 0)]);
        let a = associate(&[track_at(0.0, 0.0, 0.01, 0)], &[det(5.0, 0.0)], &model()).unwrap();
        assert!(a.matches.is_empty());
        assert_eq!((a.unmatched_tracks.len(), a.unmatched_detections.len()), (1, 1));
    }

    #[test]
    fn global_beats_greedy() {
        // Track 0 is nearest to detection 0, but taking that pair forces
        // track 1 onto a far detection. Costs (var 1 + R 0.01 = 1.01):
        // t0: d0 -> 0.0, d1 -> 1.0; t1: d0 -> 1.0, d1 -> 9.0 (all scaled).
        let m = model();
        let tracks = vec![track_at(0.0, 0.0, 1.0, 0), track_at(1.0, 0.0, 1.0, 1)];
        let dets = vec![det(0.0, 0.0), det(-1.0, 0.0)];
        let a = associate(&tracks, &dets, &m).unwrap();
        let cost = |i: usize, j: usize| mahalanobis_sq(&tracks[i].estimate, &dets[j].centroid, &m).unwrap();
        let straight = cost(0, 0) + cost(1, 1);
        let swapped = cost(0, 1) + cost(1, 0);
        assert!(swapped < straight);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn birth_uses_configured_covariance() {
        let m = model();
        let mut seq = 0;
        let assoc = Association { unmatched_detections: vec![0], ..Default::default() };
        let out = track_lifecycle_step(vec![], &assoc, &[det(2.0, 3.0)], &m, 4, RobotId(0), &mut seq).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].estimate.x, Vector4::new(2.0, 0.0, 3.0, 0.0));
        assert_eq!(out[0].estimate.p, m.initial_covariance());
        assert_eq!(out[0].status, TrackStatus::Tentative);
        assert_eq!(seq, 1);
    }

    #[test]
    fn lifecycle_thresholds() {
        let m = model();
        let mut tracker = LocalTracker::new(RobotId(0), m.clone());
        tracker.step(&[det(1.0, 1.0)], 0).unwrap();
        for tick in 1..=3 {
            assert_eq!(tracker.tracks()[0].status, TrackStatus::Tentative);
            tracker.step(&[det(1.0, 1.0)], tick).unwrap();
        }
        assert_eq!(tracker.tracks()[0].status, TrackStatus::Confirmed);
        for tick in 4..4 + m.max_misses as u64 {
            let dead = tracker.step(&[], tick).unwrap();
            assert!(dead.is_empty());
        }
        let dead = tracker.step(&[], 100).unwrap();
        assert_eq!(dead.len(), 1);
        assert_eq!(dead[0].status, TrackStatus::Dead);
        assert!(tracker.tracks().is_empty());
    }
}
