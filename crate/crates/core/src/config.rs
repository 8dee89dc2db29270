//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusMode, ConsensusParams};
use crate::detection::DbscanParams;
use crate::error::{Error, Result};
use crate::geometry::RobotId;
use crate::local_tracker::TrackerConfig;
use crate::netsim::LinkSpec;
use crate::scenario_sim::WorldConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// CLEAR-MOT match radius, metres.
    #[serde(default = "default_match_radius")]
    pub match_radius: f64,
}

fn default_match_radius() -> f64 {
    1.0
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { match_radius: default_match_radius() }
    }
}

/// Monte Carlo grid. Every combination is one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub modes: Vec<ConsensusMode>,
    pub seeds: Vec<u64>,
    /// Overrides `base_latency` on every link.
    #[serde(default)]
    pub latency_values: Vec<u64>,
    /// Multiplies every robot's drift walk stds.
    #[serde(default)]
    pub drift_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub model: TrackerConfig,
    pub detection: DbscanParams,
    pub consensus: ConsensusParams,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types are always representable in TOML")
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.world.collect_violations(&mut out);
        self.model.collect_violations(&mut out);
        self.detection.collect_violations(&mut out);
        self.consensus.collect_violations(&mut out);
        let n = self.world.robots.len() as u32;
        for (i, l) in self.links.iter().enumerate() {
            let key = format!("links[{i}]");
            for (end, id) in [("from", l.from), ("to", l.to)] {
                if id.0 >= n {
                    out.push(format!("{key}.{end}: robot {id} does not exist ({n} robots)"));
                }
            }
            l.collect_violations(&key, &mut out);
        }
        if !(self.evaluation.match_radius >= 0.0) {
            out.push("evaluation.match_radius: must be >= 0".into());
        }
        if let Some(s) = &self.sweep {
            if s.modes.is_empty() {
                out.push("sweep.modes: must not be empty".into());
            }
            if s.seeds.is_empty() {
                out.push("sweep.seeds: must not be empty".into());
            }
            if s.drift_values.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                out.push("sweep.drift_values: entries must be finite and >= 0".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Applies a sweep cell: seed, mode, latency override and drift scale.
    pub fn with_overrides(&self, mode: ConsensusMode, seed: u64, latency: Option<u64>, drift_scale: f64) -> Self {
        let mut c = self.clone();
        c.consensus.mode = mode;
        c.world.rng_seed = seed;
        if let Some(l) = latency {
            for link in &mut c.links {
                link.base_latency = l;
            }
        }
        for r in &mut c.world.robots {
            r.drift.bias_walk_std *= drift_scale;
            r.drift.heading_walk_std *= drift_scale;
        }
        c.sweep = None;
        c
    }

    /// Largest configured base latency, the value reported for a run.
    pub fn latency(&self) -> u64 {
        self.links.iter().map(|l| l.base_latency).max().unwrap_or(0)
    }

    /// Bidirectional links between every pair of robots.
    pub fn fully_connected(num_robots: u32, base_latency: u64) -> Vec<LinkSpec> {
        let mut links = Vec::new();
        for a in 0..num_robots {
            for b in 0..num_robots {
                if a != b {
                    links.push(LinkSpec::new(RobotId(a), RobotId(b), base_latency));
                }
            }
        }
        links
    }
}
