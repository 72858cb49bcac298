//! Per-episode metric records and their CSV form.
//!
//! Column order is fixed: `run_index, episode, steps_survived, cat_harms,
//! robot_harmed, batteries_robot, batteries_human, return_robot,
//! return_human, equality_final, epsilon, mean_loss_self, mean_loss_emp`.
//! Fields that do not apply to an environment (or, for the losses, episodes
//! that ran before the replay memory was warm) are left empty.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::EpisodeMetrics;
use crate::error::{Error, Result};

pub const METRIC_COLUMNS: [&str; 11] = [
    "steps_survived",
    "cat_harms",
    "robot_harmed",
    "batteries_robot",
    "batteries_human",
    "return_robot",
    "return_human",
    "equality_final",
    "epsilon",
    "mean_loss_self",
    "mean_loss_emp",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_index: usize,
    pub episode: usize,
    pub steps_survived: usize,
    pub cat_harms: Option<u32>,
    pub robot_harmed: Option<u8>,
    pub batteries_robot: Option<usize>,
    pub batteries_human: Option<usize>,
    pub return_robot: f64,
    pub return_human: Option<f64>,
    pub equality_final: Option<f64>,
    pub epsilon: f64,
    pub mean_loss_self: Option<f64>,
    pub mean_loss_emp: Option<f64>,
}

impl MetricsRow {
    pub fn from_episode(run_index: usize, episode: usize, m: &EpisodeMetrics) -> Self {
        Self {
            run_index,
            episode,
            steps_survived: m.steps_survived,
            cat_harms: m.tally.cat_harms,
            robot_harmed: m.tally.robot_harmed.map(u8::from),
            batteries_robot: m.tally.batteries_robot,
            batteries_human: m.tally.batteries_human,
            return_robot: m.return_robot,
            return_human: m.tally.return_human,
            equality_final: m.tally.equality_final,
            epsilon: m.epsilon,
            mean_loss_self: m.mean_loss_self,
            mean_loss_emp: m.mean_loss_emp,
        }
    }

    /// Value of one of [`METRIC_COLUMNS`] as a float.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "steps_survived" => Some(self.steps_survived as f64),
            "cat_harms" => self.cat_harms.map(f64::from),
            "robot_harmed" => self.robot_harmed.map(f64::from),
            "batteries_robot" => self.batteries_robot.map(|v| v as f64),
            "batteries_human" => self.batteries_human.map(|v| v as f64),
            "return_robot" => Some(self.return_robot),
            "return_human" => self.return_human,
            "equality_final" => self.equality_final,
            "epsilon" => Some(self.epsilon),
            "mean_loss_self" => self.mean_loss_self,
            "mean_loss_emp" => self.mean_loss_emp,
            _ => None,
        }
    }
}

pub fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        writer.write_record(header())?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRow>, _>>()
        .map_err(Error::from)
}

pub fn header() -> Vec<&'static str> {
    let mut cols = vec!["run_index", "episode"];
    cols.extend(METRIC_COLUMNS);
    cols
}

/// Shortest representation that parses back to the same value.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            run_index: 1,
            episode: 3,
            steps_survived: 41,
            cat_harms: Some(1),
            robot_harmed: Some(0),
            batteries_robot: None,
            batteries_human: None,
            return_robot: 41.0,
            return_human: None,
            equality_final: None,
            epsilon: 0.1 + 0.2,
            mean_loss_self: Some(1.0 / 3.0),
            mean_loss_emp: None,
        }
    }

    #[test]
    fn schema_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_rows(&path, &[row()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), header().join(","));
        assert_eq!(lines.next().unwrap(), "1,3,41,1,0,,,41.0,,,0.30000000000000004,0.3333333333333333,");
        assert_eq!(read_rows(&path).unwrap(), vec![row()]);
    }

    #[test]
    fn empty_file_still_has_a_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_rows(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), header().join(","));
    }

    #[test]
    fn metric_lookup() {
        let r = row();
        assert_eq!(r.metric("cat_harms"), Some(1.0));
        assert_eq!(r.metric("equality_final"), None);
        assert_eq!(r.metric("bogus"), None);
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1.0), "1.0");
    }
}
