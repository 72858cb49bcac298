//! `empathic`: train, sweep and plot empathic DQN experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use empathic_core::harness::{self, load_config, ExperimentReport, RunConfig};
use empathic_core::BaselineMode;

#[derive(Parser)]
#[command(name = "empathic", version, about = "Empathic deep Q-learning experiments on two-agent gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of one configuration and aggregate the runs.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Train a grid of selfishness weights and baselines, then chart them.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Selfishness weights, e.g. `1.0,0.5,0.25`.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        betas: Vec<f64>,
        /// Reward-shaping baselines run at beta 1: none, harm_penalty, equality_modulated.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "none")]
        baselines: Vec<BaselineMode>,
    },
    /// Render one metric of a metrics CSV as an SVG line chart.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
        /// Trailing moving-average window in episodes.
        #[arg(long, default_value_t = 100)]
        window: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed`; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> empathic_core::Result<RunConfig> {
        let mut config = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn report_runs(label: &str, report: &ExperimentReport) -> usize {
    println!(
        "{label}: {} run(s) written, aggregate {}",
        report.run_files.len(),
        report.aggregate.display()
    );
    for f in &report.failures {
        eprintln!("{label}: run {} (seed {}) failed: {}", f.run, f.seed, f.error);
    }
    report.failures.len()
}

fn run(cli: Cli) -> empathic_core::Result<usize> {
    match cli.command {
        Command::Train { common } => {
            let config = common.load()?;
            let report = harness::run_experiment(&config)?;
            Ok(report_runs(&display(&config.output_dir), &report))
        }
        Command::Sweep { common, betas, baselines } => {
            let config = common.load()?;
            let report = harness::sweep(&config, &betas, &baselines)?;
            let failures = report
                .cells
                .iter()
                .map(|(cell, r)| report_runs(&cell.dir_name(), r))
                .sum();
            println!("comparison: {}", report.comparison.display());
            for chart in &report.charts {
                println!("chart: {}", chart.display());
            }
            Ok(failures)
        }
        Command::Plot { csv, metric, out, window } => {
            let series = harness::plot(&csv, &metric, &out, window)?;
            println!("{}: {} series", out.display(), series.len());
            Ok(0)
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
