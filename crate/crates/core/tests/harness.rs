use std::path::Path;

use empathic_core::harness::{aggregate_runs, read_rows, run_experiment, run_file_name, AGGREGATE_FILE, METRIC_COLUMNS};
use empathic_core::{AgentConfig, EnvironmentKind, RunConfig};

fn small(kind: EnvironmentKind, dir: &Path) -> RunConfig {
    let mut c = RunConfig::new(kind);
    c.episodes = 6;
    c.runs = 3;
    c.max_steps_per_episode = 25;
    c.smoothing_window = 4;
    c.base_seed = 90;
    c.output_dir = dir.to_path_buf();
    c.agent = AgentConfig {
        hidden_layers: vec![12, 12],
        batch_size: 8,
        warm_start: 16,
        replay_capacity: 200,
        target_sync_steps: 20,
        epsilon_decay_steps: 100,
        ..AgentConfig::default()
    };
    c
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn runs_are_byte_identical_regardless_of_parallelism() {
    for kind in [EnvironmentKind::Coexistence, EnvironmentKind::Sharing] {
        let serial = tempfile::tempdir().unwrap();
        let parallel = tempfile::tempdir().unwrap();
        let a = small(kind, serial.path());
        let b = small(kind, parallel.path());
        in_pool(1, || run_experiment(&a).unwrap());
        in_pool(4, || run_experiment(&b).unwrap());
        for name in (0..3).map(run_file_name).chain([AGGREGATE_FILE.to_string()]) {
            assert_eq!(
                std::fs::read(serial.path().join(&name)).unwrap(),
                std::fs::read(parallel.path().join(&name)).unwrap(),
                "{kind:?} {name}"
            );
        }
    }
}

#[test]
fn aggregate_recomputes_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(EnvironmentKind::Coexistence, dir.path())).unwrap();
    let original = std::fs::read(&report.aggregate).unwrap();
    std::fs::remove_file(&report.aggregate).unwrap();
    aggregate_runs(&report.run_files, 4, &report.aggregate).unwrap();
    assert_eq!(std::fs::read(&report.aggregate).unwrap(), original);
}

#[test]
fn aggregate_means_match_the_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(EnvironmentKind::Sharing, dir.path())).unwrap();
    let runs: Vec<_> = report.run_files.iter().map(|p| read_rows(p).unwrap()).collect();

    let mut reader = csv::Reader::from_path(&report.aggregate).unwrap();
    let headers = reader.headers().unwrap().clone();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 6);
    for metric in METRIC_COLUMNS {
        let mean_col = headers.iter().position(|h| h == format!("{metric}_mean")).unwrap();
        let smooth_col = headers.iter().position(|h| h == format!("{metric}_smoothed")).unwrap();
        let mut means = Vec::new();
        for (e, record) in records.iter().enumerate() {
            let values: Vec<f64> = runs.iter().filter_map(|r| r[e].metric(metric)).collect();
            let cell = &record[mean_col];
            if values.is_empty() {
                assert!(cell.is_empty(), "{metric} episode {}", e + 1);
                means.push(None);
                continue;
            }
            let oracle = values.iter().sum::<f64>() / values.len() as f64;
            let got: f64 = cell.parse().unwrap();
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{metric} episode {}", e + 1);
            means.push(Some(got));
        }
        // trailing window of 4 over the present means
        for (e, record) in records.iter().enumerate() {
            let window: Vec<f64> = means[e.saturating_sub(3)..=e].iter().flatten().copied().collect();
            let cell = &record[smooth_col];
            if window.is_empty() {
                assert!(cell.is_empty());
            } else {
                let oracle = window.iter().sum::<f64>() / window.len() as f64;
                assert!((cell.parse::<f64>().unwrap() - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
            }
        }
    }
}

#[test]
fn one_run_two_episodes_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(EnvironmentKind::Coexistence, dir.path());
    c.runs = 1;
    c.episodes = 2;
    let report = run_experiment(&c).unwrap();
    assert_eq!(report.run_files.len(), 1);
    let text = std::fs::read_to_string(&report.run_files[0]).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with(
        "run_index,episode,steps_survived,cat_harms,robot_harmed,batteries_robot,batteries_human,\
         return_robot,return_human,equality_final,epsilon,mean_loss_self,mean_loss_emp\n"
    ));
    let rows = read_rows(&report.run_files[0]).unwrap();
    assert_eq!(rows.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![1, 2]);
    assert!(rows.iter().all(|r| r.cat_harms.is_some() && r.batteries_robot.is_none()));
}

#[test]
fn config_round_trips_through_toml() {
    let c = small(EnvironmentKind::Sharing, Path::new("out"));
    let text = c.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
}
