//! Parameter sweeps over the selfishness weight and the baselines.

use std::path::{Path, PathBuf};

use crate::agent::BaselineMode;
use crate::error::{Error, Result};
use crate::harness::config::{EnvironmentKind, RunConfig};
use crate::harness::experiment::{run_experiment, ExperimentReport};
use crate::harness::metrics::{header, read_rows};
use crate::harness::plot::plot;

pub const COMPARISON_FILE: &str = "comparison.csv";

/// One sweep cell: a `beta` value trained under a reward-shaping mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub beta: f64,
    pub baseline: BaselineMode,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        format!("beta_{}_{}", self.beta, self.baseline.name())
    }
}

/// Every `beta` without shaping, then each shaping baseline at `beta = 1`
/// (a plain self-interested learner with a modified reward). Listing `none`
/// among the baselines adds nothing beyond the `beta` cells.
pub fn sweep_cells(betas: &[f64], baselines: &[BaselineMode]) -> Vec<SweepCell> {
    let mut cells: Vec<SweepCell> = betas
        .iter()
        .map(|&beta| SweepCell { beta, baseline: BaselineMode::None })
        .collect();
    for &baseline in baselines {
        let cell = SweepCell { beta: 1.0, baseline };
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    cells
}

#[derive(Debug)]
pub struct SweepReport {
    pub cells: Vec<(SweepCell, ExperimentReport)>,
    pub comparison: PathBuf,
    pub charts: Vec<PathBuf>,
}

pub fn chart_metrics(kind: EnvironmentKind) -> &'static [&'static str] {
    match kind {
        EnvironmentKind::Coexistence => &["steps_survived", "cat_harms"],
        EnvironmentKind::Sharing => &["batteries_robot", "batteries_human", "equality_final"],
    }
}

/// Runs one experiment per cell under `config.output_dir/<cell>`, then writes
/// a long-format comparison CSV and one chart per headline metric.
pub fn sweep(config: &RunConfig, betas: &[f64], baselines: &[BaselineMode]) -> Result<SweepReport> {
    if betas.is_empty() || baselines.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one beta and one baseline".into()));
    }
    let cells = sweep_cells(betas, baselines);
    let root = &config.output_dir;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let mut reports = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut cfg = config.clone();
        cfg.agent.beta = cell.beta;
        cfg.agent.baseline_mode = cell.baseline;
        cfg.output_dir = root.join(cell.dir_name());
        cfg.validate()?;
        reports.push((cell, run_experiment(&cfg)?));
    }

    let comparison = root.join(COMPARISON_FILE);
    write_comparison(&reports, &comparison)?;
    let charts = chart_metrics(config.environment)
        .iter()
        .map(|metric| {
            let out = root.join(format!("{metric}.svg"));
            plot(&comparison, metric, &out, config.smoothing_window).map(|_| out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        cells: reports,
        comparison,
        charts,
    })
}

fn write_comparison(reports: &[(SweepCell, ExperimentReport)], out: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(out)?;
    let mut cols = vec!["beta", "baseline"];
    cols.extend(header());
    writer.write_record(&cols)?;
    for (cell, report) in reports {
        let beta = cell.beta.to_string();
        for file in &report.run_files {
            for row in read_rows(file)? {
                writer.serialize((&beta, cell.baseline.name(), row))?;
            }
        }
    }
    writer.flush().map_err(|e| Error::io(out, e))
}
