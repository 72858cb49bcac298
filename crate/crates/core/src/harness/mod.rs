//! Configuration, multi-seed experiments, metric files, sweeps and charts.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod sweep;

pub use config::{load_config, EnvironmentKind, RunConfig};
pub use experiment::{aggregate_runs, run_experiment, run_file_name, run_single, ExperimentReport, RunFailure, AGGREGATE_FILE};
pub use metrics::{read_rows, write_rows, MetricsRow, METRIC_COLUMNS};
pub use plot::{load_series, plot, trailing_mean, Series};
pub use sweep::{sweep, sweep_cells, SweepCell, SweepReport, COMPARISON_FILE};
