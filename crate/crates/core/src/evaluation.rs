//! CLEAR-MOT scoring, Monte Carlo aggregation and report tables.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::consensus::ConsensusMode;
use crate::error::{Error, Result};
use crate::geometry::{Point2, RobotId};
use crate::local_tracker::{hungarian, TrackId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub tick: u64,
    pub matches: u64,
    pub false_positives: u64,
    pub misses: u64,
    pub id_switches: u64,
    pub gt_count: u64,
    pub sum_match_dist: f64,
}

/// Matching memory carried between frames of one scored sequence.
#[derive(Debug, Clone, Default)]
pub struct MatchState {
    previous: BTreeMap<usize, TrackId>,
    last_matched: BTreeMap<usize, TrackId>,
}

/// One ground-truth to track pairing in a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatch {
    pub gt: usize,
    pub track: TrackId,
    pub distance: f64,
}

/// Scores one frame. `gt[k]` is ground-truth object `k`.
///
/// Pairs from the previous frame are kept while still within
/// `match_radius`; the remainder is matched by Hungarian assignment on
/// Euclidean distance, gated at `match_radius`.
pub fn score_frame(
    tick: u64,
    gt: &[Point2],
    tracks: &[(TrackId, Point2)],
    match_radius: f64,
    state: &mut MatchState,
) -> (FrameScore, Vec<FrameMatch>) {
    let mut matched: Vec<FrameMatch> = Vec::new();
    let mut gt_used = vec![false; gt.len()];
    let mut tr_used = vec![false; tracks.len()];
    for (&g, &tid) in &state.previous {
        let Some(ti) = tracks.iter().position(|(id, _)| *id == tid) else {
            continue;
        };
        if g >= gt.len() || tr_used[ti] {
            continue;
        }
        let d = (gt[g] - tracks[ti].1).norm();
        if d <= match_radius {
            gt_used[g] = true;
            tr_used[ti] = true;
            matched.push(FrameMatch { gt: g, track: tid, distance: d });
        }
    }

    let free_gt: Vec<usize> = (0..gt.len()).filter(|&g| !gt_used[g]).collect();
    let free_tr: Vec<usize> = (0..tracks.len()).filter(|&t| !tr_used[t]).collect();
    if !free_gt.is_empty() && !free_tr.is_empty() {
        let sentinel = 1e6 * (1.0 + match_radius);
        let cost: Vec<Vec<f64>> = free_gt
            .iter()
            .map(|&g| {
                free_tr
                    .iter()
                    .map(|&t| {
                        let d = (gt[g] - tracks[t].1).norm();
                        if d <= match_radius {
                            d
                        } else {
                            sentinel
                        }
                    })
                    .collect()
            })
            .collect();
        for (i, j) in hungarian(&cost).pairs {
            if cost[i][j] < sentinel {
                let (g, t) = (free_gt[i], free_tr[j]);
                matched.push(FrameMatch { gt: g, track: tracks[t].0, distance: cost[i][j] });
            }
        }
    }
    matched.sort_by_key(|m| m.gt);

    let mut score = FrameScore { tick, gt_count: gt.len() as u64, ..FrameScore::default() };
    score.matches = matched.len() as u64;
    score.misses = score.gt_count - score.matches;
    score.false_positives = tracks.len() as u64 - score.matches;
    state.previous.clear();
    for m in &matched {
        score.sum_match_dist += m.distance;
        if let Some(prev) = state.last_matched.insert(m.gt, m.track) {
            if prev != m.track {
                score.id_switches += 1;
            }
        }
        state.previous.insert(m.gt, m.track);
    }
    (score, matched)
}

/// `1 - (FN + FP + IDSW) / GT` over all frames.
pub fn mota(frames: &[FrameScore]) -> Result<f64> {
    MotaCounts::from_frames(frames).mota()
}

/// Summed CLEAR-MOT counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotaCounts {
    pub frames: u64,
    pub gt: u64,
    pub matches: u64,
    pub misses: u64,
    pub false_positives: u64,
    pub id_switches: u64,
    pub sum_match_dist: f64,
}

impl MotaCounts {
    pub fn from_frames(frames: &[FrameScore]) -> Self {
        let mut c = Self::default();
        for f in frames {
            c.add(f);
        }
        c
    }

    pub fn add(&mut self, f: &FrameScore) {
        self.frames += 1;
        self.gt += f.gt_count;
        self.matches += f.matches;
        self.misses += f.misses;
        self.false_positives += f.false_positives;
        self.id_switches += f.id_switches;
        self.sum_match_dist += f.sum_match_dist;
    }

    pub fn mota(&self) -> Result<f64> {
        if self.gt == 0 {
            return Err(Error::UndefinedMetric("MOTA with zero ground-truth objects"));
        }
        let errors = (self.misses + self.false_positives + self.id_switches) as f64;
        Ok(1.0 - errors / self.gt as f64)
    }
}

/// Mean, median, population std and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        Some(Self { n, mean, median, std: var.sqrt(), min: sorted[0], max: sorted[n - 1] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Pre-consensus track states.
    Local,
    /// Post-consensus track states.
    Global,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Local => "local",
            Scope::Global => "global",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub from: RobotId,
    pub to: RobotId,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotScore {
    pub robot: RobotId,
    pub local: MotaCounts,
    pub global: MotaCounts,
    pub local_mota: Option<f64>,
    pub global_mota: Option<f64>,
    /// RMS of matched global position errors, metres.
    pub position_rmse: Option<f64>,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub mode: ConsensusMode,
    pub seed: u64,
    pub latency: u64,
    pub drift_scale: f64,
    pub num_ticks: u64,
    pub robots: Vec<RobotScore>,
    pub links: Vec<LinkReport>,
}

/// One statistics cell of the aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mode: ConsensusMode,
    pub latency: u64,
    pub drift_scale: f64,
    pub robot: RobotId,
    pub scope: Scope,
    pub stats: Summary,
}

/// Everything written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub runs: Vec<RunSummary>,
    pub cells: Vec<Cell>,
}

fn cell_order(a: &Cell, b: &Cell) -> Ordering {
    (a.mode.as_str(), a.latency)
        .cmp(&(b.mode.as_str(), b.latency))
        .then(a.drift_scale.total_cmp(&b.drift_scale))
        .then((a.robot, a.scope).cmp(&(b.robot, b.scope)))
}

/// Groups runs by (mode, latency, drift, robot, scope) and summarises MOTA
/// across seeds. Runs whose MOTA is undefined are skipped in their cell.
pub fn aggregate_runs(runs: Vec<RunSummary>) -> RunReport {
    let mut groups: Vec<(Cell, Vec<f64>)> = Vec::new();
    for run in &runs {
        for r in &run.robots {
            for (scope, value) in [(Scope::Local, r.local_mota), (Scope::Global, r.global_mota)] {
                let Some(v) = value else { continue };
                let probe = Cell {
                    mode: run.mode,
                    latency: run.latency,
                    drift_scale: run.drift_scale,
                    robot: r.robot,
                    scope,
                    stats: Summary { n: 0, mean: 0.0, median: 0.0, std: 0.0, min: 0.0, max: 0.0 },
                };
                match groups.iter_mut().find(|(c, _)| cell_order(c, &probe) == Ordering::Equal) {
                    Some((_, vals)) => vals.push(v),
                    None => groups.push((probe, vec![v])),
                }
            }
        }
    }
    let mut cells: Vec<Cell> = groups
        .into_iter()
        .map(|(mut c, vals)| {
            c.stats = Summary::of(&vals).expect("non-empty group");
            c
        })
        .collect();
    cells.sort_by(cell_order);
    RunReport { runs, cells }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    /// `None` when the compared reports each hold a single, different mode.
    pub mode: Option<ConsensusMode>,
    pub latency: u64,
    pub drift_scale: f64,
    pub robot: RobotId,
    pub scope: Scope,
    pub mean_a: f64,
    pub mean_b: f64,
    pub delta: f64,
}

fn modes(r: &RunReport) -> Vec<ConsensusMode> {
    let mut m: Vec<ConsensusMode> = r.cells.iter().map(|c| c.mode).collect();
    m.sort_by_key(|m| m.as_str());
    m.dedup();
    m
}

/// Per-cell `mean(b) - mean(a)`.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<Vec<DeltaRow>> {
    let (ma, mb) = (modes(a), modes(b));
    let ignore_mode = ma.len() == 1 && mb.len() == 1;
    let key = |c: &Cell| {
        (
            if ignore_mode { None } else { Some(c.mode.as_str()) },
            c.latency,
            c.drift_scale.to_bits(),
            c.robot,
            c.scope,
        )
    };
    let index_b: BTreeMap<_, &Cell> = b.cells.iter().map(|c| (key(c), c)).collect();
    let index_a: BTreeMap<_, &Cell> = a.cells.iter().map(|c| (key(c), c)).collect();
    if index_a.len() != a.cells.len() || index_b.len() != b.cells.len() {
        return Err(Error::StructureMismatch("duplicate cells in a report".into()));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for ca in &a.cells {
        match index_b.get(&key(ca)) {
            Some(cb) => rows.push(DeltaRow {
                mode: (!ignore_mode).then_some(ca.mode),
                latency: ca.latency,
                drift_scale: ca.drift_scale,
                robot: ca.robot,
                scope: ca.scope,
                mean_a: ca.stats.mean,
                mean_b: cb.stats.mean,
                delta: cb.stats.mean - ca.stats.mean,
            }),
            None => missing.push(format!("robot {} {} latency {} drift {}", ca.robot, ca.scope.as_str(), ca.latency, ca.drift_scale)),
        }
    }
    for cb in &b.cells {
        if !index_a.contains_key(&key(cb)) {
            missing.push(format!("robot {} {} latency {} drift {} (only in second report)", cb.robot, cb.scope.as_str(), cb.latency, cb.drift_scale));
        }
    }
    if !missing.is_empty() {
        return Err(Error::StructureMismatch(format!("cells without counterpart: {}", missing.join("; "))));
    }
    Ok(rows)
}

/// Robot labels are 1-based in human-facing tables.
fn robot_label(r: RobotId) -> String {
    format!("Robot {}", r.0 + 1)
}

pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<9} {:<7} {:<9} {:>7} {:>6} {:>4} {:>8} {:>8} {:>8} {:>17}",
        "robot", "scope", "mode", "latency", "drift", "n", "mean", "median", "std", "range"
    );
    for c in &report.cells {
        let s = &c.stats;
        let _ = writeln!(
            out,
            "{:<9} {:<7} {:<9} {:>7} {:>6} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>17}",
            robot_label(c.robot),
            c.scope.as_str(),
            c.mode.as_str(),
            c.latency,
            format!("{}", c.drift_scale),
            s.n,
            s.mean,
            s.median,
            s.std,
            format!("[{:.3}, {:.3}]", s.min, s.max)
        );
    }
    // Delta rows: adaptive minus standard, where both exist.
    let mut deltas = String::new();
    for c in report.cells.iter().filter(|c| c.mode == ConsensusMode::Standard) {
        if let Some(a) = report.cells.iter().find(|a| {
            a.mode == ConsensusMode::Adaptive
                && a.latency == c.latency
                && a.drift_scale == c.drift_scale
                && a.robot == c.robot
                && a.scope == c.scope
        }) {
            let _ = writeln!(
                deltas,
                "{:<9} {:<7} {:>7} {:>6}   delta mean (adaptive - standard) {:>+8.3}",
                robot_label(c.robot),
                c.scope.as_str(),
                c.latency,
                format!("{}", c.drift_scale),
                a.stats.mean - c.stats.mean
            );
        }
    }
    if !deltas.is_empty() {
        out.push('\n');
        out.push_str(&deltas);
    }
    out
}

pub fn render_deltas(rows: &[DeltaRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<9} {:<7} {:<9} {:>7} {:>6} {:>8} {:>8} {:>8}",
        "robot", "scope", "mode", "latency", "drift", "mean_a", "mean_b", "delta"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<9} {:<7} {:<9} {:>7} {:>6} {:>8.3} {:>8.3} {:>+8.3}",
            robot_label(r.robot),
            r.scope.as_str(),
            r.mode.map_or("-", ConsensusMode::as_str),
            r.latency,
            format!("{}", r.drift_scale),
            r.mean_a,
            r.mean_b,
            r.delta
        );
    }
    out
}
