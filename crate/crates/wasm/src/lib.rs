//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every function returns plain JSON text so the page needs no glue
//! beyond what wasm-bindgen generates.

use std::path::Path;

use dkcf_core::config::ExperimentConfig;
use dkcf_core::consensus::{adaptive_weights, ConsensusMode};
use dkcf_core::detection::{dbscan, extract_detections, polar_to_cartesian, transform_to_global, DbscanParams, Label};
use dkcf_core::experiment::Simulation;
use dkcf_core::scenario_sim::World;
use dkcf_core::{Point2, RobotId};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const SCENARIO: &str = include_str!("../../../configs/quickstart.toml");

/// Frames kept per second of simulated time.
const FRAME_RATE: f64 = 5.0;

fn base_config() -> Result<ExperimentConfig, String> {
    ExperimentConfig::from_toml_str(SCENARIO, Path::new("quickstart.toml")).map_err(|e| e.to_string())
}

fn xy(p: &Point2) -> Value {
    json!([p.x, p.y])
}

/// Runs the demo scenario and returns sampled trajectories plus per-robot
/// MOTA as JSON.
pub fn simulate_json(mode: &str, drift_scale: f64, latency: u64, seed: u64, duration: f64) -> Result<String, String> {
    let mode: ConsensusMode = mode.parse()?;
    let mut cfg = base_config()?.with_overrides(mode, seed, Some(latency), drift_scale);
    cfg.world.duration = duration;
    let stride = ((1.0 / (FRAME_RATE * cfg.world.tick_period)).round() as u64).max(1);
    let bounds = cfg.world.arena_bounds;
    let mut sim = Simulation::new(cfg, false).map_err(|e| e.to_string())?;
    let mut frames = Vec::new();
    while let Some(out) = sim.step().map_err(|e| e.to_string())? {
        if out.snapshot.tick % stride != 0 {
            continue;
        }
        let robots: Vec<Value> = out
            .robots
            .iter()
            .map(|r| {
                let i = r.robot.0 as usize;
                json!({
                    "truth": xy(&out.snapshot.true_robot_poses[i].position),
                    "believed": xy(&out.snapshot.believed_robot_poses[i].position),
                    "local": r.local.iter().map(|(_, e)| xy(&e.position())).collect::<Vec<_>>(),
                    "global": r.global.iter().map(|(_, e)| xy(&e.position())).collect::<Vec<_>>(),
                })
            })
            .collect();
        frames.push(json!({
            "tick": out.snapshot.tick,
            "targets": out.snapshot.true_target_positions.iter().map(xy).collect::<Vec<_>>(),
            "robots": robots,
        }));
    }
    let (summary, _) = sim.finish("demo", drift_scale).map_err(|e| e.to_string())?;
    let scores: Vec<Value> = summary
        .robots
        .iter()
        .map(|r| json!({ "robot": r.robot.0, "local_mota": r.local_mota, "global_mota": r.global_mota, "rmse": r.position_rmse }))
        .collect();
    Ok(json!({ "arena": [bounds.min, bounds.max], "frames": frames, "scores": scores }).to_string())
}

/// Normalised inverse-sigma consensus weights.
pub fn weights_json(sigmas: &[f64]) -> Result<String, String> {
    adaptive_weights(sigmas).map(|w| json!(w).to_string()).map_err(|e| e.to_string())
}

/// Clusters one robot's first scan of the demo world.
pub fn cluster_json(robot: u32, seed: u64, epsilon: f64, min_pts: usize) -> Result<String, String> {
    let mut cfg = base_config()?;
    cfg.world.rng_seed = seed;
    let bounds = cfg.world.arena_bounds;
    let params = DbscanParams { epsilon, min_pts, ..cfg.detection.clone() };
    let mut world = World::new(cfg.world).map_err(|e| e.to_string())?;
    let snap = world.step().ok_or("scenario has no ticks")?;
    let i = robot as usize;
    let pose = snap.believed_robot_poses.get(i).ok_or("no such robot")?;
    let points = transform_to_global(&polar_to_cartesian(&snap.scans[i]), pose);
    let labels = dbscan(&points, &params);
    let dets = extract_detections(&labels, &points, &params, snap.tick, RobotId(robot));
    let pts: Vec<Value> = points
        .iter()
        .zip(&labels)
        .map(|(p, l)| match l {
            Label::Cluster(c) => json!([p.x, p.y, c]),
            Label::Noise => json!([p.x, p.y, -1]),
        })
        .collect();
    Ok(json!({
        "arena": [bounds.min, bounds.max],
        "robot": xy(&pose.position),
        "targets": snap.true_target_positions.iter().map(xy).collect::<Vec<_>>(),
        "points": pts,
        "detections": dets.iter().map(|d| json!([d.centroid.x, d.centroid.y, d.support])).collect::<Vec<_>>(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn simulate(mode: &str, drift_scale: f64, latency: u32, seed: u32, duration: f64) -> Result<String, JsError> {
    simulate_json(mode, drift_scale, latency.into(), seed.into(), duration).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn weights(sigmas: &[f64]) -> Result<String, JsError> {
    weights_json(sigmas).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cluster(robot: u32, seed: u32, epsilon: f64, min_pts: u32) -> Result<String, JsError> {
    cluster_json(robot, seed.into(), epsilon, min_pts as usize).map_err(|e| JsError::new(&e))
}
