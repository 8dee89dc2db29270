//! In-memory CSV logs of one run, flushed to a run directory at the end.

use std::path::Path;

use csv::Writer;

use crate::error::{Error, Result};

/// A CSV table built in memory.
pub struct Table {
    file_name: &'static str,
    writer: Writer<Vec<u8>>,
}

impl Table {
    pub fn new(file_name: &'static str, header: &[&str]) -> Self {
        let mut writer = Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { file_name, writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn file_name(&self) -> &'static str {
        self.file_name
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}

/// Every per-run CSV.
pub struct RunLogs {
    pub ground_truth: Table,
    pub detections: Table,
    pub tracks: Table,
    pub consensus: Table,
    pub errors: Table,
}

impl Default for RunLogs {
    fn default() -> Self {
        Self::new()
    }
}

impl RunLogs {
    pub fn new() -> Self {
        Self {
            ground_truth: Table::new("ground_truth.csv", &["tick", "kind", "id", "x", "y", "heading"]),
            detections: Table::new("detections.csv", &["tick", "robot_id", "x", "y", "support"]),
            tracks: Table::new(
                "tracks.csv",
                &["tick", "robot_id", "track_id", "scope", "x", "y", "vx", "vy", "pos_var_trace"],
            ),
            consensus: Table::new(
                "consensus.csv",
                &["tick", "robot_id", "track_id", "neighbors", "residual_m", "gain_norm", "weight_self", "weights_neighbors"],
            ),
            errors: Table::new("errors.csv", &["tick", "robot_id", "gt_id", "err_m"]),
        }
    }

    pub fn write_to(self, dir: &Path) -> Result<()> {
        for table in [self.ground_truth, self.detections, self.tracks, self.consensus, self.errors] {
            let path = dir.join(table.file_name());
            std::fs::write(&path, table.into_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Shortest round-trip formatting, so logs are byte-stable.
pub fn num(v: f64) -> String {
    format!("{v}")
}
