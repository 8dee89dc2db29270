//! Scan to detections: polar conversion, frame transform, DBSCAN over a
//! uniform grid, and centroid extraction with large-cluster rejection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Pose2D, RobotId};
use crate::scenario_sim::ScanBeam;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub range: f64,
    pub bearing: f64,
    /// Laser-frame position.
    pub cartesian: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    pub epsilon: f64,
    pub min_pts: usize,
    /// Clusters whose diameter exceeds this are treated as static structure.
    pub max_cluster_extent: f64,
}

impl DbscanParams {
    pub fn collect_violations(&self, out: &mut Vec<String>) {
        if !(self.epsilon > 0.0) {
            out.push(format!("detection.epsilon: must be > 0 (got {})", self.epsilon));
        }
        if self.min_pts < 1 {
            out.push("detection.min_pts: must be >= 1".into());
        }
        if !(self.max_cluster_extent > 0.0) {
            out.push(format!(
                "detection.max_cluster_extent: must be > 0 (got {})",
                self.max_cluster_extent
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// In the robot's believed odometry frame.
    pub centroid: Point2,
    pub frame: RobotId,
    pub tick: u64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Noise,
    Cluster(usize),
}

/// Converts beams with a return to laser-frame points; no-return beams are
/// dropped.
pub fn polar_to_cartesian(scan: &[ScanBeam]) -> Vec<ScanPoint> {
    scan.iter()
        .filter(|b| b.is_return())
        .map(|b| ScanPoint {
            range: b.range,
            bearing: b.bearing,
            cartesian: Point2::new(b.range * b.bearing.cos(), b.range * b.bearing.sin()),
        })
        .collect()
}

pub fn transform_to_global(points: &[ScanPoint], believed_pose: &Pose2D) -> Vec<Point2> {
    points.iter().map(|p| believed_pose.transform_point(&p.cartesian)).collect()
}

/// Uniform grid with cell side equal to the query radius, so every
/// neighbour lies in the 3x3 block around a point's cell.
///
/// Points are bucketed column-major over the occupied cell box, so the
/// three cells `(cx, cy-1..=cy+1)` form one contiguous run. Inputs that
/// span an enormous box fall back to binary search over sorted keys.
struct Grid<'a> {
    points: &'a [Point2],
    eps_sq: f64,
    keys: Vec<(i64, i64)>,
    layout: Layout,
}

enum Layout {
    Dense { x0: i64, y0: i64, w: i64, h: i64, start: Vec<usize>, order: Vec<usize> },
    Sorted(Vec<((i64, i64), usize)>),
}

impl<'a> Grid<'a> {
    fn new(points: &'a [Point2], eps: f64) -> Self {
        let inv_cell = 1.0 / eps;
        let keys: Vec<(i64, i64)> = points.iter().map(|p| Self::key(p, inv_cell)).collect();
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(x, y) in &keys {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let (w, h) = (x1.saturating_sub(x0).saturating_add(1), y1.saturating_sub(y0).saturating_add(1));
        let dense_ok = w > 0 && h > 0 && w.checked_mul(h).is_some_and(|c| c <= 16 * points.len() as i64 + 4096);
        let layout = if dense_ok {
            let cells = (w * h) as usize;
            let mut start = vec![0usize; cells + 1];
            let idx = |&(x, y): &(i64, i64)| ((x - x0) * h + (y - y0)) as usize;
            for k in &keys {
                start[idx(k) + 1] += 1;
            }
            for c in 0..cells {
                start[c + 1] += start[c];
            }
            let mut fill = start.clone();
            let mut order = vec![0usize; points.len()];
            for (i, k) in keys.iter().enumerate() {
                let c = idx(k);
                order[fill[c]] = i;
                fill[c] += 1;
            }
            Layout::Dense { x0, y0, w, h, start, order }
        } else {
            let mut sorted: Vec<((i64, i64), usize)> = keys.iter().copied().zip(0..).collect();
            sorted.sort_unstable();
            Layout::Sorted(sorted)
        };
        Self { points, eps_sq: eps * eps, keys, layout }
    }

    fn key(p: &Point2, inv_cell: f64) -> (i64, i64) {
        ((p.x * inv_cell).floor() as i64, (p.y * inv_cell).floor() as i64)
    }

    /// Calls `f` on every point in the 3x3 block around point `i`'s cell
    /// until it returns false.
    fn for_block(&self, i: usize, mut f: impl FnMut(usize) -> bool) {
        let (cx, cy) = self.keys[i];
        match &self.layout {
            Layout::Dense { x0, y0, w, h, start, order } => {
                let (ylo, yhi) = ((cy - 1).max(*y0) - y0, (cy + 1).min(y0 + h - 1) - y0);
                for x in (cx - 1).max(*x0)..=(cx + 1).min(x0 + w - 1) {
                    let col = (x - x0) * h;
                    let (lo, hi) = (start[(col + ylo) as usize], start[(col + yhi) as usize + 1]);
                    for &j in &order[lo..hi] {
                        if !f(j) {
                            return;
                        }
                    }
                }
            }
            Layout::Sorted(sorted) => {
                for dx in -1..=1 {
                    let lo = sorted.partition_point(|e| e.0 < (cx + dx, cy - 1));
                    let hi = sorted.partition_point(|e| e.0 <= (cx + dx, cy + 1));
                    for e in &sorted[lo..hi] {
                        if !f(e.1) {
                            return;
                        }
                    }
                }
            }
        }
    }

    /// Indices within eps of point `i`, including `i`.
    fn neighbours(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        self.for_block(i, |j| {
            if (self.points[j] - p).norm_squared() <= self.eps_sq {
                out.push(j);
            }
            true
        });
    }

    /// Whether at least `k` points lie within eps of point `i`.
    fn has_at_least(&self, i: usize, k: usize) -> bool {
        let p = self.points[i];
        let mut count = 0;
        self.for_block(i, |j| {
            if (self.points[j] - p).norm_squared() <= self.eps_sq {
                count += 1;
            }
            count < k
        });
        count >= k
    }
}

/// DBSCAN with a grid-accelerated neighbourhood query.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `epsilon`. Clusters are numbered in order of their
/// lowest-index core point; a border point reachable from several
/// clusters joins the lowest-numbered one.
pub fn dbscan(points: &[Point2], params: &DbscanParams) -> Vec<Label> {
    let n = points.len();
    let mut labels = vec![Label::Noise; n];
    if n == 0 {
        return labels;
    }
    let grid = Grid::new(points, params.epsilon);
    let is_core: Vec<bool> = (0..n).map(|i| grid.has_at_least(i, params.min_pts)).collect();
    let mut buf = Vec::new();

    let mut assigned = vec![false; n];
    let mut next_cluster = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !is_core[seed] || assigned[seed] {
            continue;
        }
        let cid = next_cluster;
        next_cluster += 1;
        assigned[seed] = true;
        labels[seed] = Label::Cluster(cid);
        queue.push_back(seed);
        // Expansion order within a cluster does not affect membership:
        // a border point goes to whichever cluster reaches it first, and
        // clusters are grown one at a time in seed order.
        while let Some(p) = queue.pop_front() {
            grid.neighbours(p, &mut buf);
            for &q in &buf {
                if assigned[q] {
                    continue;
                }
                assigned[q] = true;
                labels[q] = Label::Cluster(cid);
                if is_core[q] {
                    queue.push_back(q);
                }
            }
        }
    }
    labels
}

/// Largest pairwise distance within a point set.
pub fn diameter(points: &[Point2]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}

/// `diameter(points) > extent`, skipping the quadratic scan when the
/// bounding box already decides it.
fn exceeds_extent(points: &[Point2], extent: f64) -> bool {
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let span = hi - lo;
    if span.x > extent || span.y > extent {
        return true;
    }
    if span.norm() <= extent {
        return false;
    }
    diameter(points) > extent
}

/// One detection per cluster that is small enough to be an object.
///
/// Clusters with fewer than `min_pts` members (possible when an earlier
/// cluster claimed their border points) are dropped as well.
pub fn extract_detections(
    labels: &[Label],
    points: &[Point2],
    params: &DbscanParams,
    tick: u64,
    robot_id: RobotId,
) -> Vec<Detection> {
    let n_clusters = labels
        .iter()
        .filter_map(|l| match l {
            Label::Cluster(c) => Some(c + 1),
            Label::Noise => None,
        })
        .max()
        .unwrap_or(0);
    let mut members: Vec<Vec<Point2>> = vec![Vec::new(); n_clusters];
    for (label, p) in labels.iter().zip(points) {
        if let Label::Cluster(c) = label {
            members[*c].push(*p);
        }
    }
    members
        .into_iter()
        .filter(|m| m.len() >= params.min_pts && !m.is_empty())
        .filter(|m| !exceeds_extent(m, params.max_cluster_extent))
        .map(|m| {
            let sum = m.iter().fold(Point2::zeros(), |acc, p| acc + p);
            Detection {
                centroid: sum / m.len() as f64,
                frame: robot_id,
                tick,
                support: m.len(),
            }
        })
        .collect()
}

/// Full per-robot detection pipeline for one scan.
pub fn detect(
    scan: &[ScanBeam],
    believed_pose: &Pose2D,
    params: &DbscanParams,
    tick: u64,
    robot_id: RobotId,
) -> Vec<Detection> {
    let global = transform_to_global(&polar_to_cartesian(scan), believed_pose);
    let labels = dbscan(&global, params);
    extract_detections(&labels, &global, params, tick, robot_id)
}
