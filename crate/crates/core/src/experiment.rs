//! The tick loop tying world, detection, tracking, network and consensus
//! together, plus single-run and sweep drivers.

use std::path::Path;

use nalgebra::Vector4;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::consensus::{ConsensusMode, ConsensusModel, ConsensusNode, FusionEvent, TrackMessage};
use crate::detection::{detect, Detection};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate_runs, render_table, score_frame, LinkReport, MatchState, MotaCounts, RobotScore, RunReport, RunSummary};
use crate::geometry::{Point2, RobotId};
use crate::local_tracker::{LocalTracker, ModelParams, StateEstimate, TrackId, TrackStatus};
use crate::logs::{num, RunLogs};
use crate::netsim::Network;
use crate::scenario_sim::{World, WorldSnapshot};

/// What one robot did on one tick.
#[derive(Debug, Clone)]
pub struct RobotTick {
    pub robot: RobotId,
    pub detections: Vec<Detection>,
    /// Confirmed tracks before consensus.
    pub local: Vec<(TrackId, StateEstimate)>,
    /// Confirmed tracks after consensus and mistrack removal.
    pub global: Vec<(TrackId, StateEstimate)>,
    /// Every live track after the tick, any status.
    pub all_tracks: Vec<(TrackId, TrackStatus, StateEstimate)>,
    pub fusion: Vec<FusionEvent>,
    pub mistracks: Vec<TrackId>,
    pub messages_received: usize,
}

#[derive(Debug, Clone)]
pub struct TickOutput {
    pub snapshot: WorldSnapshot,
    pub robots: Vec<RobotTick>,
}

#[derive(Default)]
struct RobotEval {
    local_state: MatchState,
    global_state: MatchState,
    local: MotaCounts,
    global: MotaCounts,
    sq_err: f64,
    n_err: u64,
}

/// A running simulation. Advance it with [`Simulation::step`].
pub struct Simulation {
    config: ExperimentConfig,
    world: World,
    trackers: Vec<LocalTracker>,
    nodes: Vec<ConsensusNode>,
    network: Network,
    eval: Vec<RobotEval>,
    logs: Option<RunLogs>,
}

fn positions(tracks: &[(TrackId, StateEstimate)]) -> Vec<(TrackId, Point2)> {
    tracks.iter().map(|(id, e)| (*id, e.position())).collect()
}

fn confirmed(tracker: &LocalTracker) -> Vec<(TrackId, StateEstimate)> {
    tracker.confirmed().map(|t| (t.id, t.estimate.clone())).collect()
}

impl Simulation {
    pub fn new(config: ExperimentConfig, record_logs: bool) -> Result<Self> {
        config.validate()?;
        let world = World::new(config.world.clone())?;
        let model = ModelParams::new(config.world.tick_period, &config.model);
        let cmodel = ConsensusModel { a: model.f, q: model.q, norm: config.consensus.gain_norm };
        let ids: Vec<RobotId> = world.robot_ids().collect();
        let trackers = ids.iter().map(|&r| LocalTracker::new(r, model.clone())).collect();
        let nodes = ids.iter().map(|&r| ConsensusNode::new(r, config.consensus.clone(), cmodel.clone())).collect();
        let network = Network::new(&config.links, config.world.rng_seed);
        let eval = ids.iter().map(|_| RobotEval::default()).collect();
        Ok(Self { config, world, trackers, nodes, network, eval, logs: record_logs.then(RunLogs::new) })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn num_ticks(&self) -> u64 {
        self.world.num_ticks()
    }

    pub fn trackers(&self) -> &[LocalTracker] {
        &self.trackers
    }

    pub fn node(&self, robot: RobotId) -> &ConsensusNode {
        &self.nodes[robot.0 as usize]
    }

    /// Runs one tick; `None` once the run is over.
    pub fn step(&mut self) -> Result<Option<TickOutput>> {
        let Some(snap) = self.world.step() else {
            return Ok(None);
        };
        let tick = snap.tick;
        let n = self.trackers.len();

        let mut robots = Vec::with_capacity(n);
        for i in 0..n {
            let robot = RobotId(i as u32);
            let dets = detect(&snap.scans[i], &snap.believed_robot_poses[i], &self.config.detection, tick, robot);
            let tracker = &mut self.trackers[i];
            tracker.step(&dets, tick)?;
            let local = confirmed(tracker);
            for t in tracker.confirmed() {
                self.network.broadcast(
                    &TrackMessage {
                        sender: robot,
                        track_id: t.id,
                        x: t.estimate.x,
                        p: t.estimate.p,
                        z: t.last_measurement,
                        r: tracker.model().r,
                        sigma_loc: snap.localization_std[i],
                        sent_tick: tick,
                    },
                    tick,
                );
            }
            robots.push(RobotTick {
                robot,
                detections: dets,
                local,
                global: Vec::new(),
                all_tracks: Vec::new(),
                fusion: Vec::new(),
                mistracks: Vec::new(),
                messages_received: 0,
            });
        }

        for (i, out) in robots.iter_mut().enumerate() {
            let inbox = self.network.poll(out.robot, tick);
            out.messages_received = inbox.len();
            let tracker = &mut self.trackers[i];
            let outcome = self.nodes[i].fuse(tracker, &inbox, tick, snap.localization_std[i])?;
            tracker.reap();
            out.fusion = outcome.events;
            out.mistracks = outcome.mistracks;
            out.global = confirmed(tracker);
            out.all_tracks = tracker.tracks().iter().map(|t| (t.id, t.status, t.estimate.clone())).collect();
        }

        self.score_and_log(&snap, &robots);
        Ok(Some(TickOutput { snapshot: snap, robots }))
    }

    fn score_and_log(&mut self, snap: &WorldSnapshot, robots: &[RobotTick]) {
        let gt = &snap.true_target_positions;
        let radius = self.config.evaluation.match_radius;
        let tick = snap.tick;
        for out in robots {
            let ev = &mut self.eval[out.robot.0 as usize];
            let (ls, _) = score_frame(tick, gt, &positions(&out.local), radius, &mut ev.local_state);
            ev.local.add(&ls);
            let (gs, matches) = score_frame(tick, gt, &positions(&out.global), radius, &mut ev.global_state);
            ev.global.add(&gs);
            for m in &matches {
                ev.sq_err += m.distance * m.distance;
                ev.n_err += 1;
            }
            if let Some(logs) = &mut self.logs {
                let rid = out.robot.0.to_string();
                for m in &matches {
                    logs.errors.row([tick.to_string(), rid.clone(), m.gt.to_string(), num(m.distance)]);
                }
                for d in &out.detections {
                    logs.detections.row([tick.to_string(), rid.clone(), num(d.centroid.x), num(d.centroid.y), d.support.to_string()]);
                }
                for (scope, list) in [("local", &out.local), ("global", &out.global)] {
                    for (id, e) in list {
                        let x: &Vector4<f64> = &e.x;
                        logs.tracks.row([
                            tick.to_string(),
                            rid.clone(),
                            id.to_string(),
                            scope.to_string(),
                            num(x[0]),
                            num(x[2]),
                            num(x[1]),
                            num(x[3]),
                            num(e.position_trace()),
                        ]);
                    }
                }
                for f in &out.fusion {
                    let w: Vec<String> = f.weight_neighbors.iter().map(|w| num(*w)).collect();
                    logs.consensus.row([
                        tick.to_string(),
                        rid.clone(),
                        f.track_id.to_string(),
                        f.n_neighbors.to_string(),
                        num(f.residual),
                        num(f.fused.gain.norm()),
                        num(f.weight_self),
                        w.join(";"),
                    ]);
                }
            }
        }
        if let Some(logs) = &mut self.logs {
            for (k, p) in gt.iter().enumerate() {
                logs.ground_truth.row([tick.to_string(), "target".into(), k.to_string(), num(p.x), num(p.y), String::new()]);
            }
            for (kind, poses) in [("robot_true", &snap.true_robot_poses), ("robot_believed", &snap.believed_robot_poses)] {
                for (k, p) in poses.iter().enumerate() {
                    logs.ground_truth.row([
                        tick.to_string(),
                        kind.into(),
                        k.to_string(),
                        num(p.position.x),
                        num(p.position.y),
                        num(p.heading),
                    ]);
                }
            }
        }
    }

    /// Runs to completion and summarises.
    pub fn finish(mut self, name: &str, drift_scale: f64) -> Result<(RunSummary, Option<RunLogs>)> {
        while self.step()?.is_some() {}
        let robots = self
            .eval
            .iter()
            .enumerate()
            .map(|(i, e)| RobotScore {
                robot: RobotId(i as u32),
                local: e.local,
                global: e.global,
                local_mota: e.local.mota().ok(),
                global_mota: e.global.mota().ok(),
                position_rmse: (e.n_err > 0).then(|| (e.sq_err / e.n_err as f64).sqrt()),
            })
            .collect();
        let links = self
            .network
            .counters()
            .into_iter()
            .map(|(spec, c)| LinkReport { from: spec.from, to: spec.to, sent: c.sent, delivered: c.delivered, dropped: c.dropped })
            .collect();
        let summary = RunSummary {
            name: name.to_string(),
            mode: self.config.consensus.mode,
            seed: self.config.world.rng_seed,
            latency: self.config.latency(),
            drift_scale,
            num_ticks: self.world.tick(),
            robots,
            links,
        };
        Ok((summary, self.logs))
    }
}

/// Runs one configuration without touching the filesystem.
pub fn simulate(config: &ExperimentConfig, name: &str, drift_scale: f64) -> Result<RunSummary> {
    Ok(Simulation::new(config.clone(), false)?.finish(name, drift_scale)?.0)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    write(&dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    write(&dir.join("report.txt"), render_table(report))
}

/// Runs one configuration and writes its logs and report into `dir`.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path, name: &str, drift_scale: f64) -> Result<RunReport> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("config.toml"), config.to_toml())?;
    let (summary, logs) = Simulation::new(config.clone(), true)?.finish(name, drift_scale)?;
    if let Some(logs) = logs {
        logs.write_to(dir)?;
    }
    let report = aggregate_runs(vec![summary]);
    write_report(dir, &report)?;
    Ok(report)
}

/// One cell of a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub mode: ConsensusMode,
    pub latency: Option<u64>,
    pub drift_scale: f64,
    pub seed: u64,
}

impl SweepPoint {
    pub fn name(&self, config: &ExperimentConfig) -> String {
        let lat = self.latency.unwrap_or_else(|| config.latency());
        format!("{}_lat{}_drift{}_seed{}", self.mode.as_str(), lat, self.drift_scale, self.seed)
    }
}

/// Expands the sweep grid; without a sweep section, a single point from
/// the base configuration.
pub fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let Some(s) = &config.sweep else {
        return vec![SweepPoint { mode: config.consensus.mode, latency: None, drift_scale: 1.0, seed: config.world.rng_seed }];
    };
    let lats: Vec<Option<u64>> = if s.latency_values.is_empty() { vec![None] } else { s.latency_values.iter().map(|l| Some(*l)).collect() };
    let drifts = if s.drift_values.is_empty() { vec![1.0] } else { s.drift_values.clone() };
    let mut out = Vec::new();
    for &mode in &s.modes {
        for &latency in &lats {
            for &drift_scale in &drifts {
                for &seed in &s.seeds {
                    out.push(SweepPoint { mode, latency, drift_scale, seed });
                }
            }
        }
    }
    out
}

/// Runs the whole grid in parallel. With `out_dir`, each run gets its own
/// subdirectory and the aggregate report is written at the top level.
pub fn sweep(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    config.validate()?;
    let points = sweep_points(config);
    let runs: Vec<RunSummary> = points
        .par_iter()
        .map(|pt| {
            let cfg = config.with_overrides(pt.mode, pt.seed, pt.latency, pt.drift_scale);
            let name = pt.name(config);
            match out_dir {
                Some(dir) => {
                    let report = run_to_dir(&cfg, &dir.join(&name), &name, pt.drift_scale)?;
                    Ok(report.runs.into_iter().next().expect("one run"))
                }
                None => simulate(&cfg, &name, pt.drift_scale),
            }
        })
        .collect::<Result<_>>()?;
    let report = aggregate_runs(runs);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("config.toml"), config.to_toml())?;
        write_report(dir, &report)?;
    }
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}
