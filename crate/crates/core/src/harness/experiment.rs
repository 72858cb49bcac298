//! Seeded multi-run experiments and their aggregation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::agent::AgentRuntime;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::harness::config::{EnvironmentKind, RunConfig};
use crate::harness::metrics::{format_float, read_rows, write_rows, MetricsRow, METRIC_COLUMNS};

pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub fn run_file_name(run: usize) -> String {
    format!("run_{run}.csv")
}

#[derive(Debug)]
pub struct RunFailure {
    pub run: usize,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    /// Per-run CSVs of the runs that completed, in run order.
    pub run_files: Vec<PathBuf>,
    pub aggregate: PathBuf,
    pub failures: Vec<RunFailure>,
}

/// Trains one agent from scratch with seed `base_seed + run`.
pub fn run_single(config: &RunConfig, run: usize) -> Result<Vec<MetricsRow>> {
    match config.environment {
        EnvironmentKind::Coexistence => train_run(config, run, &config.coexistence_env()?),
        EnvironmentKind::Sharing => train_run(config, run, &config.sharing_env()?),
    }
}

fn train_run<E: Environment>(config: &RunConfig, run: usize, env: &E) -> Result<Vec<MetricsRow>> {
    let mut agent = AgentRuntime::new(config.agent.clone(), config.seed_for_run(run))?;
    (1..=config.episodes)
        .map(|episode| {
            let metrics = agent.train_episode(env)?;
            Ok(MetricsRow::from_episode(run, episode, &metrics))
        })
        .collect()
}

/// Runs every seed (in parallel), writes `run_<i>.csv` per completed run and
/// an aggregate over them. A failed run is reported with its seed and does
/// not stop the others.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentReport> {
    execute(config, |run| run_single(config, run))
}

fn execute<F>(config: &RunConfig, runner: F) -> Result<ExperimentReport>
where
    F: Fn(usize) -> Result<Vec<MetricsRow>> + Sync,
{
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let outcomes: Vec<(usize, Result<Vec<MetricsRow>>)> = (0..config.runs)
        .into_par_iter()
        .map(|run| (run, runner(run)))
        .collect();

    let mut run_files = Vec::new();
    let mut failures = Vec::new();
    for (run, outcome) in outcomes {
        match outcome {
            Ok(rows) => {
                let path = dir.join(run_file_name(run));
                write_rows(&path, &rows)?;
                run_files.push(path);
            }
            Err(error) => failures.push(RunFailure {
                run,
                seed: config.seed_for_run(run),
                error,
            }),
        }
    }
    let failure_log = dir.join("failures.txt");
    if failure_log.exists() {
        std::fs::remove_file(&failure_log).map_err(|e| Error::io(&failure_log, e))?;
    }
    if !failures.is_empty() {
        let log: String = failures
            .iter()
            .map(|f| format!("run {} seed {}: {}\n", f.run, f.seed, f.error))
            .collect();
        std::fs::write(&failure_log, log).map_err(|e| Error::io(&failure_log, e))?;
    }

    let aggregate = dir.join(AGGREGATE_FILE);
    aggregate_runs(&run_files, config.smoothing_window, &aggregate)?;
    Ok(ExperimentReport {
        output_dir: dir.clone(),
        run_files,
        aggregate,
        failures,
    })
}

/// Per-episode mean across runs of every metric, plus its trailing moving
/// average. Reads only the per-run CSVs.
pub fn aggregate_runs(run_files: &[PathBuf], window: usize, out: &Path) -> Result<()> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be positive".into()));
    }
    let runs = run_files
        .iter()
        .map(|p| read_rows(p))
        .collect::<Result<Vec<_>>>()?;
    let episodes = runs.iter().map(Vec::len).max().unwrap_or(0);

    let mut header = vec!["episode".to_string(), "runs".to_string()];
    for m in METRIC_COLUMNS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_smoothed"));
    }

    let mut columns: Vec<(Vec<Option<f64>>, Vec<Option<f64>>)> = Vec::new();
    for m in METRIC_COLUMNS {
        let means: Vec<Option<f64>> = (0..episodes)
            .map(|e| mean(runs.iter().filter_map(|r| r.get(e).and_then(|row| row.metric(m)))))
            .collect();
        let smoothed = smooth_sparse(&means, window);
        columns.push((means, smoothed));
    }

    let mut writer = csv::Writer::from_path(out)?;
    writer.write_record(&header)?;
    for e in 0..episodes {
        let present = runs.iter().filter(|r| r.len() > e).count();
        let mut record = vec![(e + 1).to_string(), present.to_string()];
        for (means, smoothed) in &columns {
            record.push(means[e].map(format_float).unwrap_or_default());
            record.push(smoothed[e].map(format_float).unwrap_or_default());
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(out, e))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Trailing mean where gaps are skipped; a window with no values stays empty.
fn smooth_sparse(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            mean(values[start..=i].iter().flatten().copied())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;

    fn tiny(kind: EnvironmentKind, dir: &Path) -> RunConfig {
        let mut c = RunConfig::new(kind);
        c.episodes = 3;
        c.runs = 2;
        c.max_steps_per_episode = 20;
        c.smoothing_window = 2;
        c.output_dir = dir.to_path_buf();
        c.agent = AgentConfig {
            hidden_layers: vec![8],
            batch_size: 4,
            warm_start: 10,
            replay_capacity: 100,
            target_sync_steps: 10,
            epsilon_decay_steps: 50,
            ..AgentConfig::default()
        };
        c
    }

    #[test]
    fn sparse_smoothing_skips_gaps() {
        let v = [None, Some(1.0), None, Some(3.0)];
        assert_eq!(smooth_sparse(&v, 2), vec![None, Some(1.0), Some(1.0), Some(3.0)]);
    }

    #[test]
    fn writes_runs_and_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&tiny(EnvironmentKind::Sharing, dir.path())).unwrap();
        assert_eq!(report.run_files.len(), 2);
        assert!(report.failures.is_empty());
        for (i, f) in report.run_files.iter().enumerate() {
            let rows = read_rows(f).unwrap();
            assert_eq!(rows.len(), 3);
            assert!(rows.iter().all(|r| r.run_index == i && r.cat_harms.is_none()));
        }
        let text = std::fs::read_to_string(&report.aggregate).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().starts_with("episode,runs,steps_survived_mean"));
    }

    #[test]
    fn failed_runs_are_recorded_without_stopping_others() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(EnvironmentKind::Coexistence, dir.path());
        c.runs = 3;
        c.base_seed = 10;
        let report = execute(&c, |run| {
            if run == 1 {
                Err(Error::NonFinite("loss gradient"))
            } else {
                run_single(&c, run)
            }
        })
        .unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!((report.failures[0].run, report.failures[0].seed), (1, 11));
        assert_eq!(report.run_files.len(), 2);
        assert!(!dir.path().join(run_file_name(1)).exists());
        let log = std::fs::read_to_string(dir.path().join("failures.txt")).unwrap();
        assert!(log.contains("seed 11"));
        // the survivors match a clean experiment run for run
        let clean = tempfile::tempdir().unwrap();
        let mut c2 = c.clone();
        c2.output_dir = clean.path().to_path_buf();
        run_experiment(&c2).unwrap();
        for run in [0, 2] {
            let name = run_file_name(run);
            assert_eq!(
                std::fs::read(dir.path().join(&name)).unwrap(),
                std::fs::read(clean.path().join(&name)).unwrap()
            );
        }
    }

    #[test]
    fn diverging_learning_aborts_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(EnvironmentKind::Coexistence, dir.path());
        c.agent.learning_rate = 1e300;
        c.agent.warm_start = 4;
        c.runs = 1;
        c.episodes = 20;
        let report = run_experiment(&c).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert!(matches!(report.failures[0].error, Error::NonFinite(_)));
    }
}
