//! Distributed Kalman-consensus fusion.
//!
//! Neighbour track messages are brought into the local frame, turned into
//! information pairs, and fused with the local posterior through either
//! the standard consensus step (gain `M / (1 + ||M||)`) or the adaptive
//! step that weights each neighbour by inverse position uncertainty.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{Matrix2, Matrix2x4, Matrix4, SymmetricEigen, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, rotation, Point2, RobotId};
use crate::local_tracker::{hungarian, LocalTracker, StateEstimate, Track, TrackId, TrackStatus};

/// What one robot broadcasts about one of its confirmed tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMessage {
    pub sender: RobotId,
    pub track_id: TrackId,
    /// Sender's local posterior, in the sender's believed frame.
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    /// Detection associated on `sent_tick`; `None` while coasting.
    pub z: Option<Vector2<f64>>,
    pub r: Matrix2<f64>,
    /// Sender's own localization std, metres.
    pub sigma_loc: f64,
    pub sent_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMode {
    Standard,
    Adaptive,
}

impl ConsensusMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsensusMode::Standard => "standard",
            ConsensusMode::Adaptive => "adaptive",
        }
    }
}

impl std::str::FromStr for ConsensusMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "standard" => Ok(ConsensusMode::Standard),
            "adaptive" => Ok(ConsensusMode::Adaptive),
            other => Err(format!("unknown consensus mode `{other}` (expected standard|adaptive)")),
        }
    }
}

/// Matrix norm used in the standard consensus gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainNorm {
    #[default]
    Frobenius,
    Spectral,
}

/// How much of the estimated inter-robot transform is applied to a
/// neighbour's estimate before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionAlignment {
    /// Map neighbour estimates fully into the local believed frame.
    Full,
    /// Apply the fraction `s_j^2 / (s_i^2 + s_j^2)` of the transform, with
    /// `s` the localization std: the frame offset is attributed to the
    /// robots in proportion to their localization variance.
    #[default]
    LocalizationWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusParams {
    pub mode: ConsensusMode,
    /// Position gate for cross-robot track identity, metres.
    pub match_dist_threshold: f64,
    /// Largest velocity difference still considered the same object, m/s.
    #[serde(default = "default_max_velocity_diff")]
    pub max_velocity_diff: f64,
    pub mistrack_residual_threshold: f64,
    pub mistrack_patience: u32,
    pub min_landmarks: usize,
    #[serde(default = "default_alignment_window")]
    pub alignment_window: u64,
    #[serde(default)]
    pub gain_norm: GainNorm,
    #[serde(default)]
    pub fusion_alignment: FusionAlignment,
}

fn default_max_velocity_diff() -> f64 {
    1.0
}

fn default_alignment_window() -> u64 {
    20
}

impl ConsensusParams {
    pub fn collect_violations(&self, out: &mut Vec<String>) {
        for (key, v) in [
            ("match_dist_threshold", self.match_dist_threshold),
            ("max_velocity_diff", self.max_velocity_diff),
            ("mistrack_residual_threshold", self.mistrack_residual_threshold),
        ] {
            if !(v > 0.0) {
                out.push(format!("consensus.{key}: must be > 0 (got {v})"));
            }
        }
        if self.mistrack_patience == 0 {
            out.push("consensus.mistrack_patience: must be > 0".into());
        }
        if self.min_landmarks < 2 {
            out.push("consensus.min_landmarks: must be >= 2".into());
        }
        if self.alignment_window == 0 {
            out.push("consensus.alignment_window: must be > 0".into());
        }
    }
}

/// Information-form contribution `(H^T R^-1 z, H^T R^-1 H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationPair {
    pub vector: Vector4<f64>,
    pub matrix: Matrix4<f64>,
}

impl InformationPair {
    pub fn zero() -> Self {
        Self { vector: Vector4::zeros(), matrix: Matrix4::zeros() }
    }
}

pub fn information_pair(h: &Matrix2x4<f64>, z: &Vector2<f64>, r: &Matrix2<f64>) -> Result<InformationPair> {
    let r_inv = r
        .cholesky()
        .ok_or(Error::SingularMatrix("measurement noise R"))?
        .inverse();
    let ht_rinv = h.transpose() * r_inv;
    Ok(InformationPair { vector: ht_rinv * z, matrix: ht_rinv * h })
}

pub fn aggregate_information(local: &InformationPair, neighbors: &[InformationPair]) -> InformationPair {
    neighbors.iter().fold(local.clone(), |mut acc, n| {
        acc.vector += n.vector;
        acc.matrix += n.matrix;
        acc
    })
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// `M = (P^-1 + Y)^-1`.
pub fn information_gain(p_plus: &Matrix4<f64>, y: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let eig = SymmetricEigen::new(symmetrize(p_plus)).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 1e-12 {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::IllConditioned { condition });
    }
    let p_inv = p_plus.cholesky().ok_or(Error::IllConditioned { condition: hi / lo })?.inverse();
    let info = symmetrize(&(p_inv + y));
    let m = info
        .cholesky()
        .ok_or(Error::SingularMatrix("P^-1 + Y"))?
        .inverse();
    Ok(symmetrize(&m))
}

pub fn matrix_norm(m: &Matrix4<f64>, norm: GainNorm) -> f64 {
    match norm {
        GainNorm::Frobenius => m.norm(),
        GainNorm::Spectral => m.singular_values().max(),
    }
}

/// Matrices shared by both consensus updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusModel {
    /// Covariance propagation matrix; the state transition F.
    pub a: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub norm: GainNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEstimate {
    /// Fused state and the propagated covariance `A M A^T + Q`.
    pub state: StateEstimate,
    /// The information gain M, i.e. the fused posterior covariance.
    pub gain: Matrix4<f64>,
}

fn finish(est: &StateEstimate, info: &InformationPair, m: Matrix4<f64>, consensus: Vector4<f64>, model: &ConsensusModel) -> FusedEstimate {
    let x = est.x + m * (info.vector - info.matrix * est.x) + consensus;
    let p = symmetrize(&(model.a * m * model.a.transpose() + model.q));
    FusedEstimate { state: StateEstimate::new(x, p), gain: m }
}

/// Standard Kalman-consensus step; `info` is the aggregated `(y, Y)`.
pub fn dkcf_update_standard(
    est: &StateEstimate,
    info: &InformationPair,
    neighbor_states: &[Vector4<f64>],
    model: &ConsensusModel,
) -> Result<FusedEstimate> {
    let m = information_gain(&est.p, &info.matrix)?;
    let disagreement: Vector4<f64> = neighbor_states.iter().map(|xj| xj - est.x).sum();
    let gamma = 1.0 / (1.0 + matrix_norm(&m, model.norm));
    let consensus = m * disagreement * gamma;
    Ok(finish(est, info, m, consensus, model))
}

/// Adaptive step: the consensus sum is weighted per neighbour.
/// `neighbor_weights[j]` pairs with `neighbor_states[j]`.
pub fn dkcf_update_adaptive(
    est: &StateEstimate,
    info: &InformationPair,
    neighbor_states: &[Vector4<f64>],
    neighbor_weights: &[f64],
    model: &ConsensusModel,
) -> Result<FusedEstimate> {
    assert_eq!(neighbor_states.len(), neighbor_weights.len());
    let m = information_gain(&est.p, &info.matrix)?;
    let disagreement: Vector4<f64> = neighbor_states
        .iter()
        .zip(neighbor_weights)
        .map(|(xj, w)| (xj - est.x) * *w)
        .sum();
    Ok(finish(est, info, m, m * disagreement, model))
}

/// Smallest sigma used in the weight normalisation.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Inverse-sigma weights normalised to sum to one.
///
/// Non-positive sigmas are rejected; positive sigmas below
/// [`SIGMA_FLOOR`] are clamped up to it.
pub fn adaptive_weights(sigmas: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = sigmas.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::NonPositiveSigma(bad));
    }
    let inv: Vec<f64> = sigmas.iter().map(|s| 1.0 / s.max(SIGMA_FLOOR)).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / total).collect())
}

/// Position std entering the adaptive weights: the sender's localization
/// std combined with the per-axis track position variance.
pub fn consensus_sigma(sigma_loc: f64, p: &Matrix4<f64>) -> f64 {
    (sigma_loc * sigma_loc + (p[(0, 0)] + p[(2, 2)]) / 2.0).sqrt()
}

/// Rigid transform taking points in `source_frame` to `target_frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    pub rotation: f64,
    pub translation: Vector2<f64>,
    pub source_frame: RobotId,
    pub target_frame: RobotId,
    pub residual_rms: f64,
}

impl FrameTransform {
    pub fn identity(source_frame: RobotId, target_frame: RobotId) -> Self {
        Self { rotation: 0.0, translation: Vector2::zeros(), source_frame, target_frame, residual_rms: 0.0 }
    }

    pub fn apply_point(&self, p: &Point2) -> Point2 {
        rotation(self.rotation) * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector2<f64>) -> Vector2<f64> {
        rotation(self.rotation) * v
    }

    pub fn apply_covariance2(&self, c: &Matrix2<f64>) -> Matrix2<f64> {
        let r = rotation(self.rotation);
        r * c * r.transpose()
    }

    /// Maps a `[x, vx, y, vy]` state and its covariance.
    pub fn apply_state(&self, x: &Vector4<f64>, p: &Matrix4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let pos = self.apply_point(&Vector2::new(x[0], x[2]));
        let vel = self.apply_vector(&Vector2::new(x[1], x[3]));
        let (s, c) = self.rotation.sin_cos();
        let mut r4 = Matrix4::zeros();
        for (a, b) in [(0, 2), (1, 3)] {
            r4[(a, a)] = c;
            r4[(a, b)] = -s;
            r4[(b, a)] = s;
            r4[(b, b)] = c;
        }
        (Vector4::new(pos.x, vel.x, pos.y, vel.y), symmetrize(&(r4 * p * r4.transpose())))
    }

    pub fn inverse(&self) -> Self {
        let r_inv = rotation(-self.rotation);
        Self {
            rotation: normalize_angle(-self.rotation),
            translation: -(r_inv * self.translation),
            source_frame: self.target_frame,
            target_frame: self.source_frame,
            residual_rms: self.residual_rms,
        }
    }

    /// The same transform with rotation and translation scaled by `f`.
    pub fn scaled(&self, f: f64) -> Self {
        Self { rotation: self.rotation * f, translation: self.translation * f, ..*self }
    }
}

/// Closed-form least-squares rigid alignment.
///
/// Each correspondence is `(point in target frame, point in source frame)`;
/// the result minimises `sum |R p_source + t - p_target|^2`.
pub fn estimate_frame_alignment(
    correspondences: &[(Point2, Point2)],
    source_frame: RobotId,
    target_frame: RobotId,
) -> Result<FrameTransform> {
    let n = correspondences.len();
    if n < 2 {
        return Err(Error::DegenerateGeometry("need at least two correspondences"));
    }
    let inv_n = 1.0 / n as f64;
    let c_t = correspondences.iter().fold(Point2::zeros(), |a, (t, _)| a + t) * inv_n;
    let c_s = correspondences.iter().fold(Point2::zeros(), |a, (_, s)| a + s) * inv_n;
    let (mut dot, mut cross, mut spread_s, mut spread_t) = (0.0, 0.0, 0.0, 0.0);
    for (t, s) in correspondences {
        let (a, b) = (t - c_t, s - c_s);
        dot += b.dot(&a);
        cross += b.x * a.y - b.y * a.x;
        spread_s += b.norm_squared();
        spread_t += a.norm_squared();
    }
    let scale = 1.0 + c_s.norm_squared().max(c_t.norm_squared());
    if spread_s <= 1e-20 * scale || spread_t <= 1e-20 * scale {
        return Err(Error::DegenerateGeometry("all points coincide; rotation is unobservable"));
    }
    let theta = cross.atan2(dot);
    let translation = c_t - rotation(theta) * c_s;
    let mut tf = FrameTransform { rotation: theta, translation, source_frame, target_frame, residual_rms: 0.0 };
    let sq: f64 = correspondences.iter().map(|(t, s)| (tf.apply_point(s) - t).norm_squared()).sum();
    tf.residual_rms = (sq * inv_n).sqrt();
    Ok(tf)
}

/// Kinematic summary of a track used for cross-robot identity matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackView {
    pub id: TrackId,
    pub position: Point2,
    pub velocity: Vector2<f64>,
}

impl TrackView {
    pub fn of(track: &Track) -> Self {
        Self { id: track.id, position: track.estimate.position(), velocity: track.estimate.velocity() }
    }
}

/// Pairs local and (already frame-aligned) remote tracks by position,
/// gated on distance and on velocity agreement.
pub fn match_cross_robot_tracks(
    local: &[TrackView],
    remote: &[TrackView],
    params: &ConsensusParams,
) -> Vec<(TrackId, TrackId)> {
    if local.is_empty() || remote.is_empty() {
        return Vec::new();
    }
    let sentinel = 1e6 * params.match_dist_threshold;
    let cost: Vec<Vec<f64>> = local
        .iter()
        .map(|l| {
            remote
                .iter()
                .map(|r| {
                    let d = (l.position - r.position).norm();
                    let dv = (l.velocity - r.velocity).norm();
                    if d <= params.match_dist_threshold && dv <= params.max_velocity_diff {
                        d
                    } else {
                        sentinel
                    }
                })
                .collect()
        })
        .collect();
    hungarian(&cost)
        .pairs
        .into_iter()
        .filter(|&(i, j)| cost[i][j] < sentinel)
        .map(|(i, j)| (local[i].id, remote[j].id))
        .collect()
}

/// Kills tracks whose consensus residual stayed above threshold for
/// `mistrack_patience` consecutive ticks. Tracks missing from
/// `residuals` count as zero residual.
pub fn mistrack_filter(tracks: &mut [Track], residuals: &HashMap<TrackId, f64>, params: &ConsensusParams) -> Vec<TrackId> {
    let mut killed = Vec::new();
    for t in tracks.iter_mut().filter(|t| t.status != TrackStatus::Dead) {
        let r = residuals.get(&t.id).copied().unwrap_or(0.0);
        if r > params.mistrack_residual_threshold {
            t.mistrack_strikes += 1;
        } else {
            t.mistrack_strikes = 0;
        }
        if t.mistrack_strikes >= params.mistrack_patience {
            t.status = TrackStatus::Dead;
            killed.push(t.id);
        }
    }
    killed
}

/// Per-neighbour alignment state: a sliding window of landmark
/// correspondences and the last valid transform.
#[derive(Debug, Clone)]
pub struct AlignmentState {
    pub transform: FrameTransform,
    window: VecDeque<(u64, Point2, Point2)>,
}

impl AlignmentState {
    pub fn new(source: RobotId, target: RobotId) -> Self {
        Self { transform: FrameTransform::identity(source, target), window: VecDeque::new() }
    }

    pub fn add(&mut self, tick: u64, local: Point2, remote: Point2) {
        self.window.push_back((tick, local, remote));
    }

    /// Drops correspondences older than `window` ticks before the newest
    /// one and re-estimates the transform when enough remain. Returns
    /// whether the transform changed.
    pub fn refresh(&mut self, window: u64, min_landmarks: usize) -> bool {
        let Some(newest) = self.window.iter().map(|e| e.0).max() else {
            return false;
        };
        self.window.retain(|e| e.0 + window > newest);
        if self.window.len() < min_landmarks.max(2) {
            return false;
        }
        let corr: Vec<(Point2, Point2)> = self.window.iter().map(|e| (e.1, e.2)).collect();
        match estimate_frame_alignment(&corr, self.transform.source_frame, self.transform.target_frame) {
            Ok(tf) => {
                self.transform = tf;
                true
            }
            Err(_) => false,
        }
    }
}

/// One fused track, for the consensus log.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionEvent {
    pub track_id: TrackId,
    pub residual: f64,
    pub n_neighbors: usize,
    pub weight_self: f64,
    pub weight_neighbors: Vec<f64>,
    pub fused: FusedEstimate,
}

#[derive(Debug, Clone, Default)]
pub struct FusionOutcome {
    pub events: Vec<FusionEvent>,
    pub mistracks: Vec<TrackId>,
}

/// History depth for time-consistent matching of delayed messages.
const HISTORY_TICKS: usize = 256;

/// A robot's consensus state across ticks.
#[derive(Debug, Clone)]
pub struct ConsensusNode {
    robot: RobotId,
    params: ConsensusParams,
    model: ConsensusModel,
    alignments: BTreeMap<RobotId, AlignmentState>,
    history: VecDeque<(u64, Vec<TrackView>)>,
}

struct NeighborInput {
    x: Vector4<f64>,
    p: Matrix4<f64>,
    info: Option<InformationPair>,
    sigma: f64,
}

impl ConsensusNode {
    pub fn new(robot: RobotId, params: ConsensusParams, model: ConsensusModel) -> Self {
        Self { robot, params, model, alignments: BTreeMap::new(), history: VecDeque::new() }
    }

    pub fn params(&self) -> &ConsensusParams {
        &self.params
    }

    pub fn alignment(&self, neighbor: RobotId) -> Option<&FrameTransform> {
        self.alignments.get(&neighbor).map(|a| &a.transform)
    }

    fn history_at(&self, tick: u64) -> Option<&[TrackView]> {
        self.history.iter().rev().find(|(t, _)| *t == tick).map(|(_, v)| v.as_slice())
    }

    /// Fuses delivered neighbour messages into the tracker's confirmed
    /// tracks, then applies mistrack removal.
    ///
    /// Messages are matched against the local tracks as they were at the
    /// message's send tick, then predicted forward to `tick` for fusion.
    pub fn fuse(
        &mut self,
        tracker: &mut LocalTracker,
        inbox: &[TrackMessage],
        tick: u64,
        sigma_loc_self: f64,
    ) -> Result<FusionOutcome> {
        let views: Vec<TrackView> = tracker.confirmed().map(TrackView::of).collect();
        self.history.push_back((tick, views));
        while self.history.len() > HISTORY_TICKS {
            self.history.pop_front();
        }

        // Latest message per (sender, track).
        let mut latest: BTreeMap<(RobotId, TrackId), &TrackMessage> = BTreeMap::new();
        for msg in inbox.iter().filter(|m| m.sender != self.robot) {
            let slot = latest.entry((msg.sender, msg.track_id)).or_insert(msg);
            if msg.sent_tick > slot.sent_tick {
                *slot = msg;
            }
        }
        let mut by_sender: BTreeMap<RobotId, BTreeMap<u64, Vec<&TrackMessage>>> = BTreeMap::new();
        for ((sender, _), msg) in &latest {
            by_sender.entry(*sender).or_default().entry(msg.sent_tick).or_default().push(msg);
        }

        let mut inputs: BTreeMap<TrackId, Vec<NeighborInput>> = BTreeMap::new();
        let h = tracker.model().h;
        for (sender, groups) in by_sender {
            let robot = self.robot;
            let state = self.alignments.entry(sender).or_insert_with(|| AlignmentState::new(sender, robot));
            let match_tf = state.transform;
            let mut pairs: Vec<(TrackId, &TrackMessage)> = Vec::new();
            for (sent_tick, msgs) in groups {
                let Some(reference) = self.history_at(sent_tick).map(<[TrackView]>::to_vec) else {
                    continue;
                };
                let remote: Vec<TrackView> = msgs
                    .iter()
                    .map(|m| TrackView {
                        id: m.track_id,
                        position: match_tf.apply_point(&Vector2::new(m.x[0], m.x[2])),
                        velocity: match_tf.apply_vector(&Vector2::new(m.x[1], m.x[3])),
                    })
                    .collect();
                let state = self.alignments.get_mut(&sender).expect("inserted above");
                for (local_id, remote_id) in match_cross_robot_tracks(&reference, &remote, &self.params) {
                    let local = reference.iter().find(|v| v.id == local_id).expect("matched");
                    let msg = *msgs.iter().find(|m| m.track_id == remote_id).expect("matched");
                    state.add(sent_tick, local.position, Vector2::new(msg.x[0], msg.x[2]));
                    pairs.push((local_id, msg));
                }
            }
            let state = self.alignments.get_mut(&sender).expect("inserted above");
            state.refresh(self.params.alignment_window, self.params.min_landmarks);
            let sigma_sender = pairs.first().map_or(0.0, |(_, m)| m.sigma_loc);
            let fraction = match self.params.fusion_alignment {
                FusionAlignment::Full => 1.0,
                FusionAlignment::LocalizationWeighted => {
                    let (si, sj) = (sigma_loc_self * sigma_loc_self, sigma_sender * sigma_sender);
                    if si + sj > 0.0 {
                        sj / (si + sj)
                    } else {
                        1.0
                    }
                }
            };
            let fuse_tf = state.transform.scaled(fraction);
            for (local_id, msg) in pairs {
                let (mut x, mut p) = fuse_tf.apply_state(&msg.x, &msg.p);
                // Delayed estimates are predicted up to now; their
                // measurements are stale and contribute no information.
                for _ in msg.sent_tick..tick {
                    x = self.model.a * x;
                    p = symmetrize(&(self.model.a * p * self.model.a.transpose() + self.model.q));
                }
                let info = match msg.z {
                    Some(z) if msg.sent_tick == tick => {
                        Some(information_pair(&h, &fuse_tf.apply_point(&z), &fuse_tf.apply_covariance2(&msg.r))?)
                    }
                    _ => None,
                };
                inputs.entry(local_id).or_default().push(NeighborInput {
                    x,
                    p,
                    info,
                    sigma: consensus_sigma(msg.sigma_loc, &p),
                });
            }
        }

        let mut outcome = FusionOutcome::default();
        let mut residuals = HashMap::new();
        let r_local = tracker.model().r;
        for track in tracker.tracks_mut().iter_mut().filter(|t| t.is_confirmed()) {
            let Some(neighbors) = inputs.get(&track.id) else {
                continue;
            };
            let est = track.estimate.clone();
            let local_info = match track.last_measurement {
                Some(z) => information_pair(&h, &z, &r_local)?,
                None => InformationPair::zero(),
            };
            let neighbor_info: Vec<InformationPair> = neighbors.iter().filter_map(|n| n.info.clone()).collect();
            let info = aggregate_information(&local_info, &neighbor_info);
            let states: Vec<Vector4<f64>> = neighbors.iter().map(|n| n.x).collect();
            let mut sigmas = vec![consensus_sigma(sigma_loc_self, &est.p)];
            sigmas.extend(neighbors.iter().map(|n| n.sigma));
            let weights = adaptive_weights(&sigmas)?;
            let fused = match self.params.mode {
                ConsensusMode::Standard => dkcf_update_standard(&est, &info, &states, &self.model)?,
                ConsensusMode::Adaptive => dkcf_update_adaptive(&est, &info, &states, &weights[1..], &self.model)?,
            };
            let residual = (fused.state.position() - est.position()).norm();
            residuals.insert(track.id, residual);
            track.estimate = StateEstimate::new(fused.state.x, fused.gain);
            debug_assert!(neighbors.iter().all(|n| n.p.iter().all(|v| v.is_finite())));
            outcome.events.push(FusionEvent {
                track_id: track.id,
                residual,
                n_neighbors: neighbors.len(),
                weight_self: weights[0],
                weight_neighbors: weights[1..].to_vec(),
                fused,
            });
        }
        outcome.mistracks = mistrack_filter(tracker.tracks_mut(), &residuals, &self.params);
        Ok(outcome)
    }
}
