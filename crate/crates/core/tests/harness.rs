use std::collections::BTreeMap;
use std::process::Command;

use fedfeat::federation::Strategy;
use fedfeat::harness::{read_metrics, run_experiment, write_metrics, ExperimentConfig, StrategySelection};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n_clients: 3,
        rounds: 2,
        n_classes: 3,
        per_class: 12,
        d_in: 4,
        hidden: vec![32],
        embedding_dim: 8,
        ..Default::default()
    }
}

#[test]
fn all_yields_seven_streams() {
    let metrics = run_experiment(&small()).unwrap();
    let mut streams: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for m in &metrics {
        assert!((0.0..=1.0).contains(&m.accuracy));
        streams.entry(m.strategy.to_string()).or_default().push(m.round);
    }
    assert_eq!(streams.len(), 7);
    assert!(streams.values().all(|r| r == &vec![0, 1, 2]));
    assert!(metrics
        .iter()
        .filter(|m| m.strategy == Strategy::NonFed)
        .all(|m| m.bytes_measured == 0 && m.bytes_symbolic == 0));
}

#[test]
fn single_strategy_matches_its_stream_in_all() {
    let all = run_experiment(&small()).unwrap();
    let one = run_experiment(&ExperimentConfig {
        strategy: StrategySelection::One(Strategy::RegularizedFeatureMeans),
        ..small()
    })
    .unwrap();
    let from_all: Vec<_> = all
        .iter()
        .filter(|m| m.strategy == Strategy::RegularizedFeatureMeans)
        .map(|m| (m.round, m.accuracy, m.bytes_measured))
        .collect();
    let alone: Vec<_> = one.iter().map(|m| (m.round, m.accuracy, m.bytes_measured)).collect();
    assert_eq!(from_all, alone);
}

#[test]
fn metrics_file_round_trip() {
    let metrics = run_experiment(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    write_metrics(&metrics, &path).unwrap();
    assert_eq!(read_metrics(&path).unwrap().len(), metrics.len());
    let back = read_metrics(&path).unwrap();
    for (a, b) in metrics.iter().zip(&back) {
        assert_eq!((a.round, a.strategy, a.accuracy), (b.round, b.strategy, b.accuracy));
        assert_eq!((a.bytes_symbolic, a.bytes_measured), (b.bytes_symbolic, b.bytes_measured));
    }
}

#[test]
fn csv_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let ds = fedfeat::data::synth_generate(&small().synth_config()).unwrap();
    fedfeat::data::write_csv(&ds, &path).unwrap();
    let cfg = ExperimentConfig {
        csv_path: Some(path),
        strategy: StrategySelection::One(Strategy::FeatureMeans),
        ..small()
    };
    assert_eq!(run_experiment(&cfg).unwrap().len(), 3);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fedfeat")).args(args).output().unwrap()
}

#[test]
fn cli_reports_bad_input() {
    let out = cli(&["run", "--strategy", "9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strategy"));

    let out = cli(&["run", "--n_clients", "0", "--rounds", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_clients"));

    let out = cli(&["cost", "--w-bytes", "10", "--d", "4", "--clients", "0", "--classes", "2", "--samples", "5"]);
    assert!(!out.status.success());

    assert!(!cli(&["cost", "--preset", "imagenet"]).status.success());
    assert!(!cli(&["run", "--config", "/nonexistent.cfg"]).status.success());
}

#[test]
fn cli_overrides_and_stdout() {
    let out = cli(&[
        "run", "--strategy", "2", "--rounds", "1", "--per-class", "6", "--n_classes", "2", "--n_clients", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "round,strategy,accuracy,bytes_symbolic,bytes_measured,wall_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,2,"));
}

#[test]
fn cli_cost_custom_fields() {
    let out = cli(&["cost", "--w-bytes", "100", "--d", "2", "--clients", "3", "--classes", "4", "--samples", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    // strategy 2: 2 * d * classes * clients * 4
    assert!(text.lines().any(|l| l.starts_with('2') && l.trim_end().ends_with(" 192")), "{text}");
}
