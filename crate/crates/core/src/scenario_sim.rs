//! Ground-truth world: targets bouncing along straight paths, robots
//! following waypoints, ray-cast lidar and per-robot localization drift.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, to_point, Point2, Pose2D, Rect, RobotId};
use crate::rng::{self, SimRng};

/// Range value of a beam that hit nothing within `max_range`.
pub const NO_RETURN: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub arena_bounds: Rect,
    pub targets: Vec<TargetSpec>,
    pub robots: Vec<RobotSpec>,
    pub tick_period: f64,
    pub duration: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub radius: f64,
    pub start: [f64; 2],
    pub heading: [f64; 2],
    pub speed: f64,
    /// Segment endpoints; the target reverses when it reaches either one.
    pub path: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    pub lidar: LidarSpec,
    pub drift: DriftSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarSpec {
    pub num_beams: u32,
    pub fov: f64,
    pub max_range: f64,
    pub range_noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    /// Per-axis random-walk std of the position bias, metres per sqrt(tick).
    pub bias_walk_std: f64,
    pub heading_walk_std: f64,
    pub initial_bias: [f64; 2],
}

const GEOM_TOL: f64 = 1e-6;

impl WorldConfig {
    /// Number of ticks the run lasts.
    pub fn num_ticks(&self) -> u64 {
        if self.tick_period <= 0.0 || self.duration <= 0.0 {
            return 0;
        }
        (self.duration / self.tick_period + 1e-9).floor() as u64
    }

    /// Appends one message per violated constraint.
    ///
    /// `duration == 0` is accepted and yields an empty run.
    pub fn collect_violations(&self, out: &mut Vec<String>) {
        let b = &self.arena_bounds;
        if !(b.area() > 0.0) || b.max[0] <= b.min[0] || b.max[1] <= b.min[1] {
            out.push("world.arena_bounds: arena must have positive area".into());
        }
        if !(self.tick_period > 0.0) {
            out.push(format!("world.tick_period: must be > 0 (got {})", self.tick_period));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            out.push(format!("world.duration: must be >= 0 (got {})", self.duration));
        }
        for (i, t) in self.targets.iter().enumerate() {
            let key = format!("world.targets[{i}]");
            if !(t.radius > 0.0) {
                out.push(format!("{key}.radius: must be > 0 (got {})", t.radius));
            }
            if !(t.speed >= 0.0) {
                out.push(format!("{key}.speed: must be >= 0 (got {})", t.speed));
            }
            let h = to_point(t.heading);
            if (h.norm() - 1.0).abs() > GEOM_TOL {
                out.push(format!("{key}.heading: must be a unit vector (norm {})", h.norm()));
            }
            let (a, z) = (to_point(t.path[0]), to_point(t.path[1]));
            for (end, p) in [("path[0]", a), ("path[1]", z)] {
                if !b.contains(&p) {
                    out.push(format!("{key}.{end}: outside arena"));
                }
            }
            let start = to_point(t.start);
            if !b.contains(&start) {
                out.push(format!("{key}.start: outside arena"));
            }
            let seg = z - a;
            let len = seg.norm();
            if len > 0.0 {
                let u = seg / len;
                let s = (start - a).dot(&u);
                let off = (start - a - u * s).norm();
                if off > GEOM_TOL || s < -GEOM_TOL || s > len + GEOM_TOL {
                    out.push(format!("{key}.start: must lie on its path segment"));
                }
                if (u.x * h.y - u.y * h.x).abs() > GEOM_TOL {
                    out.push(format!("{key}.heading: must be parallel to its path"));
                }
            } else if (start - a).norm() > GEOM_TOL {
                out.push(format!("{key}.start: must equal the degenerate path point"));
            }
        }
        for (i, r) in self.robots.iter().enumerate() {
            let key = format!("world.robots[{i}]");
            if r.waypoints.is_empty() {
                out.push(format!("{key}.waypoints: need at least one waypoint"));
            }
            for (k, w) in r.waypoints.iter().enumerate() {
                if !b.contains(&to_point(*w)) {
                    out.push(format!("{key}.waypoints[{k}]: outside arena"));
                }
            }
            if !(r.speed >= 0.0) {
                out.push(format!("{key}.speed: must be >= 0 (got {})", r.speed));
            }
            let l = &r.lidar;
            if l.num_beams < 1 {
                out.push(format!("{key}.lidar.num_beams: must be >= 1"));
            }
            if !(l.fov > 0.0 && l.fov <= 2.0 * PI + 1e-12) {
                out.push(format!("{key}.lidar.fov: must be in (0, 2pi] (got {})", l.fov));
            }
            if !(l.max_range > 0.0) {
                out.push(format!("{key}.lidar.max_range: must be > 0"));
            }
            if !(l.range_noise_std >= 0.0) {
                out.push(format!("{key}.lidar.range_noise_std: must be >= 0"));
            }
            let d = &r.drift;
            if !(d.bias_walk_std >= 0.0) {
                out.push(format!("{key}.drift.bias_walk_std: must be >= 0"));
            }
            if !(d.heading_walk_std >= 0.0) {
                out.push(format!("{key}.drift.heading_walk_std: must be >= 0"));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        self.collect_violations(&mut v);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// One lidar beam in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanBeam {
    /// Metres, or [`NO_RETURN`].
    pub range: f64,
    pub bearing: f64,
}

impl ScanBeam {
    pub fn is_return(&self) -> bool {
        self.range.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

pub type Segment = (Point2, Point2);

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSnapshot {
    pub tick: u64,
    pub true_target_positions: Vec<Point2>,
    pub true_robot_poses: Vec<Pose2D>,
    pub believed_robot_poses: Vec<Pose2D>,
    /// Localization std each robot reports for itself at this tick.
    pub localization_std: Vec<f64>,
    pub scans: Vec<Vec<ScanBeam>>,
}

pub fn beam_bearing(spec: &LidarSpec, k: u32) -> f64 {
    if spec.num_beams <= 1 {
        0.0
    } else {
        -spec.fov / 2.0 + f64::from(k) * spec.fov / f64::from(spec.num_beams - 1)
    }
}

/// Smallest non-negative ray parameter at which the ray meets the circle.
pub fn ray_circle(origin: &Point2, dir: &Point2, c: &Circle) -> Option<f64> {
    let f = origin - c.center;
    let b = f.dot(dir);
    let cc = f.dot(&f) - c.radius * c.radius;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = -b - sq;
    let t2 = -b + sq;
    if t1 >= 0.0 {
        Some(t1)
    } else if t2 >= 0.0 {
        Some(t2)
    } else {
        None
    }
}

pub fn ray_segment(origin: &Point2, dir: &Point2, seg: &Segment) -> Option<f64> {
    let e = seg.1 - seg.0;
    let denom = dir.x * e.y - dir.y * e.x;
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = seg.0 - origin;
    let t = (w.x * e.y - w.y * e.x) / denom;
    let s = (w.x * dir.y - w.y * dir.x) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Ray-casts one scan from `pose` against circles and wall segments.
///
/// Hit ranges get additive Gaussian noise and are clamped to
/// `[0, max_range]`; beams whose nearest hit lies beyond `max_range`
/// report [`NO_RETURN`].
pub fn cast_scan<R: Rng>(
    pose: &Pose2D,
    spec: &LidarSpec,
    circles: &[Circle],
    walls: &[Segment],
    rng: &mut R,
) -> Vec<ScanBeam> {
    let noise = (spec.range_noise_std > 0.0)
        .then(|| Normal::new(0.0, spec.range_noise_std).expect("validated std"));
    (0..spec.num_beams)
        .map(|k| {
            let bearing = beam_bearing(spec, k);
            let (s, c) = (pose.heading + bearing).sin_cos();
            let dir = Point2::new(c, s);
            let hit = circles
                .iter()
                .filter_map(|circle| ray_circle(&pose.position, &dir, circle))
                .chain(walls.iter().filter_map(|w| ray_segment(&pose.position, &dir, w)))
                .fold(f64::INFINITY, f64::min);
            let range = if hit <= spec.max_range {
                let noisy = match &noise {
                    Some(n) => hit + n.sample(rng),
                    None => hit,
                };
                noisy.clamp(0.0, spec.max_range)
            } else {
                NO_RETURN
            };
            ScanBeam { range, bearing }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct TargetState {
    origin: Point2,
    dir: Point2,
    length: f64,
    /// Arc position along the path in [0, length].
    s: f64,
    /// +1 moving toward path[1], -1 toward path[0].
    sense: f64,
    speed: f64,
    radius: f64,
}

impl TargetState {
    fn new(spec: &TargetSpec) -> Self {
        let a = to_point(spec.path[0]);
        let seg = to_point(spec.path[1]) - a;
        let length = seg.norm();
        let dir = if length > 0.0 { seg / length } else { Point2::new(1.0, 0.0) };
        let s = if length > 0.0 {
            (to_point(spec.start) - a).dot(&dir).clamp(0.0, length)
        } else {
            0.0
        };
        let sense = if to_point(spec.heading).dot(&dir) < 0.0 { -1.0 } else { 1.0 };
        Self { origin: a, dir, length, s, sense, speed: spec.speed, radius: spec.radius }
    }

    /// Moves `dist` along the path, folding overshoot back at endpoints.
    fn advance(&mut self, dist: f64) {
        if self.length <= 0.0 {
            return;
        }
        let mut s = self.s + self.sense * dist;
        loop {
            if s > self.length {
                s = 2.0 * self.length - s;
                self.sense = -self.sense;
            } else if s < 0.0 {
                s = -s;
                self.sense = -self.sense;
            } else {
                break;
            }
        }
        self.s = s;
    }

    fn position(&self) -> Point2 {
        self.origin + self.dir * self.s
    }

    fn heading(&self) -> Point2 {
        self.dir * self.sense
    }
}

#[derive(Debug, Clone)]
struct RobotState {
    pose: Pose2D,
    next_waypoint: usize,
    bias: Point2,
    heading_bias: f64,
    drift_rng: SimRng,
    lidar_rng: SimRng,
}

pub struct World {
    config: WorldConfig,
    tick: u64,
    targets: Vec<TargetState>,
    robots: Vec<RobotState>,
    walls: [Segment; 4],
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let targets = config.targets.iter().map(TargetState::new).collect();
        let robots = config
            .robots
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let start = to_point(spec.waypoints[0]);
                let (heading, next_waypoint) = match spec.waypoints.get(1) {
                    Some(w) => {
                        let d = to_point(*w) - start;
                        (d.y.atan2(d.x), 1)
                    }
                    None => (0.0, 0),
                };
                RobotState {
                    pose: Pose2D::new(start.x, start.y, heading),
                    next_waypoint,
                    bias: to_point(spec.drift.initial_bias),
                    heading_bias: 0.0,
                    drift_rng: rng::robot_stream(config.rng_seed, rng::STREAM_DRIFT, i as u32),
                    lidar_rng: rng::robot_stream(config.rng_seed, rng::STREAM_LIDAR, i as u32),
                }
            })
            .collect();
        let walls = config.arena_bounds.edges();
        Ok(Self { config, tick: 0, targets, robots, walls })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn num_ticks(&self) -> u64 {
        self.config.num_ticks()
    }

    pub fn robot_ids(&self) -> impl Iterator<Item = RobotId> {
        (0..self.robots.len() as u32).map(RobotId)
    }

    pub fn target_circles(&self) -> Vec<Circle> {
        self.targets
            .iter()
            .map(|t| Circle { center: t.position(), radius: t.radius })
            .collect()
    }

    pub fn target_headings(&self) -> Vec<Point2> {
        self.targets.iter().map(TargetState::heading).collect()
    }

    /// Advances one tick and returns the resulting snapshot, or `None` once
    /// the configured duration is exhausted.
    pub fn step(&mut self) -> Option<WorldSnapshot> {
        if self.tick >= self.num_ticks() {
            return None;
        }
        let dt = self.config.tick_period;
        for t in &mut self.targets {
            t.advance(t.speed * dt);
        }
        for (robot, spec) in self.robots.iter_mut().zip(&self.config.robots) {
            follow_waypoints(robot, spec, spec.speed * dt);
            let d = &spec.drift;
            if d.bias_walk_std > 0.0 {
                let n = Normal::new(0.0, d.bias_walk_std).expect("validated std");
                robot.bias.x += n.sample(&mut robot.drift_rng);
                robot.bias.y += n.sample(&mut robot.drift_rng);
            }
            if d.heading_walk_std > 0.0 {
                let n = Normal::new(0.0, d.heading_walk_std).expect("validated std");
                robot.heading_bias = normalize_angle(robot.heading_bias + n.sample(&mut robot.drift_rng));
            }
        }
        self.tick += 1;

        let circles = self.target_circles();
        let mut scans = Vec::with_capacity(self.robots.len());
        for (robot, spec) in self.robots.iter_mut().zip(&self.config.robots) {
            scans.push(cast_scan(&robot.pose, &spec.lidar, &circles, &self.walls, &mut robot.lidar_rng));
        }
        let tick = self.tick;
        Some(WorldSnapshot {
            tick,
            true_target_positions: circles.iter().map(|c| c.center).collect(),
            true_robot_poses: self.robots.iter().map(|r| r.pose).collect(),
            believed_robot_poses: self.robots.iter().map(believed_pose).collect(),
            localization_std: self
                .config
                .robots
                .iter()
                .map(|spec| localization_std(&spec.drift, tick))
                .collect(),
            scans,
        })
    }
}

fn believed_pose(r: &RobotState) -> Pose2D {
    Pose2D {
        position: r.pose.position + r.bias,
        heading: normalize_angle(r.pose.heading + r.heading_bias),
    }
}

/// Position std a robot reports for its own localization after `tick`
/// ticks of drift: the initial offset's per-axis spread plus the
/// accumulated random-walk variance.
pub fn localization_std(drift: &DriftSpec, tick: u64) -> f64 {
    let b = to_point(drift.initial_bias);
    (b.norm_squared() / 2.0 + tick as f64 * drift.bias_walk_std * drift.bias_walk_std).sqrt()
}

fn follow_waypoints(robot: &mut RobotState, spec: &RobotSpec, dist: f64) {
    let n = spec.waypoints.len();
    let mut remaining = dist;
    // Bounded so coincident waypoints cannot spin forever.
    for _ in 0..(2 * n + 2) {
        if remaining <= 0.0 {
            break;
        }
        let target = to_point(spec.waypoints[robot.next_waypoint]);
        let delta = target - robot.pose.position;
        let gap = delta.norm();
        if gap > 0.0 {
            robot.pose.heading = delta.y.atan2(delta.x);
        }
        if gap <= remaining {
            robot.pose.position = target;
            remaining -= gap;
            robot.next_waypoint = (robot.next_waypoint + 1) % n;
        } else {
            robot.pose.position += delta * (remaining / gap);
            remaining = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn lidar(num_beams: u32, fov: f64) -> LidarSpec {
        LidarSpec { num_beams, fov, max_range: 10.0, range_noise_std: 0.0 }
    }

    fn one_target_world(start: [f64; 2], speed: f64) -> WorldConfig {
        WorldConfig {
            arena_bounds: Rect { min: [0.0, 0.0], max: [10.0, 10.0] },
            targets: vec![TargetSpec {
                radius: 0.3,
                start,
                heading: [1.0, 0.0],
                speed,
                path: [[1.0, 5.0], [9.0, 5.0]],
            }],
            robots: vec![RobotSpec {
                waypoints: vec![[5.0, 1.0]],
                speed: 0.0,
                lidar: lidar(36, 2.0 * PI),
                drift: DriftSpec { bias_walk_std: 0.0, heading_walk_std: 0.0, initial_bias: [0.0, 0.0] },
            }],
            tick_period: 0.1,
            duration: 10.0,
            rng_seed: 7,
        }
    }

    #[test]
    fn target_advances_along_heading() {
        let mut w = World::new(one_target_world([5.0, 5.0], 1.0)).unwrap();
        let snap = w.step().unwrap();
        assert!((snap.true_target_positions[0] - Point2::new(5.1, 5.0)).norm() < 1e-12);
    }

    #[test]
    fn target_reflects_at_endpoint() {
        let mut w = World::new(one_target_world([8.95, 5.0], 1.0)).unwrap();
        let snap = w.step().unwrap();
        assert!((snap.true_target_positions[0].x - 8.95).abs() < 1e-12);
        assert!((w.target_headings()[0] - Point2::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn static_world_is_a_fixed_point() {
        let mut w = World::new(one_target_world([5.0, 5.0], 0.0)).unwrap();
        let a = w.step().unwrap();
        let b = w.step().unwrap();
        assert_eq!(b.tick, a.tick + 1);
        assert_eq!(a.true_target_positions, b.true_target_positions);
        assert_eq!(a.true_robot_poses, b.true_robot_poses);
        assert_eq!(a.believed_robot_poses, b.believed_robot_poses);
        assert_eq!(a.scans, b.scans);
    }

    #[test]
    fn zero_drift_believed_equals_true() {
        let mut w = World::new(one_target_world([5.0, 5.0], 1.0)).unwrap();
        while let Some(s) = w.step() {
            assert_eq!(s.true_robot_poses, s.believed_robot_poses);
        }
        assert_eq!(w.tick(), 100);
    }

    #[test]
    fn central_beam_hits_circle_front() {
        let spec = lidar(3, PI);
        let circle = Circle { center: Point2::new(2.0, 0.0), radius: 0.5 };
        let mut rng = SimRng::seed_from_u64(0);
        let scan = cast_scan(&Pose2D::new(0.0, 0.0, 0.0), &spec, &[circle], &[], &mut rng);
        assert_eq!(scan.len(), 3);
        assert_eq!(scan[1].bearing, 0.0);
        assert!((scan[1].range - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_world_has_no_returns() {
        let mut rng = SimRng::seed_from_u64(0);
        let scan = cast_scan(&Pose2D::new(0.0, 0.0, 0.3), &lidar(90, 2.0 * PI), &[], &[], &mut rng);
        assert!(scan.iter().all(|b| !b.is_return() && b.range == NO_RETURN));
    }

    #[test]
    fn beam_bearings_span_fov() {
        let spec = lidar(5, PI);
        assert_eq!(beam_bearing(&spec, 0), -PI / 2.0);
        assert_eq!(beam_bearing(&spec, 4), PI / 2.0);
        assert_eq!(beam_bearing(&lidar(1, PI), 0), 0.0);
    }

    #[test]
    fn far_hits_are_no_return_not_max_range() {
        let spec = LidarSpec { num_beams: 1, fov: 0.1, max_range: 1.0, range_noise_std: 0.0 };
        let circle = Circle { center: Point2::new(3.0, 0.0), radius: 0.5 };
        let mut rng = SimRng::seed_from_u64(0);
        let scan = cast_scan(&Pose2D::new(0.0, 0.0, 0.0), &spec, &[circle], &[], &mut rng);
        assert_eq!(scan[0].range, NO_RETURN);
    }

    #[test]
    fn walls_bound_every_beam() {
        let arena = Rect { min: [0.0, 0.0], max: [4.0, 4.0] };
        let spec = LidarSpec { num_beams: 64, fov: 2.0 * PI, max_range: 100.0, range_noise_std: 0.0 };
        let mut rng = SimRng::seed_from_u64(0);
        let pose = Pose2D::new(1.0, 2.5, 0.4);
        let scan = cast_scan(&pose, &spec, &[], &arena.edges(), &mut rng);
        for beam in scan {
            assert!(beam.is_return());
            let end = pose.transform_point(&Point2::new(
                beam.range * beam.bearing.cos(),
                beam.range * beam.bearing.sin(),
            ));
            let on_wall = end.x.abs() < 1e-9
                || (end.x - 4.0).abs() < 1e-9
                || end.y.abs() < 1e-9
                || (end.y - 4.0).abs() < 1e-9;
            assert!(on_wall, "{end:?}");
        }
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut c = one_target_world([5.0, 5.0], 1.0);
        c.tick_period = 0.0;
        c.targets[0].radius = -1.0;
        c.robots[0].lidar.num_beams = 0;
        match World::new(c) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("expected validation error, got {:?}", other.err()),
        }
    }

    #[test]
    fn robot_follows_waypoints_in_a_loop() {
        let mut c = one_target_world([5.0, 5.0], 0.0);
        c.robots[0].waypoints = vec![[1.0, 1.0], [2.0, 1.0]];
        c.robots[0].speed = 5.0;
        let mut w = World::new(c).unwrap();
        let s = w.step().unwrap();
        assert!((s.true_robot_poses[0].position - Point2::new(1.5, 1.0)).norm() < 1e-12);
        let s = w.step().unwrap();
        assert!((s.true_robot_poses[0].position - Point2::new(2.0, 1.0)).norm() < 1e-12);
        let s = w.step().unwrap();
        assert!((s.true_robot_poses[0].position - Point2::new(1.5, 1.0)).norm() < 1e-12);
        assert!((s.true_robot_poses[0].heading - PI).abs() < 1e-12);
    }
}
