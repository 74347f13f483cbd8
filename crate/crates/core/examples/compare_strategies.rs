//! Every strategy plus the non-federated reference on one shared split,
//! written as a metrics CSV.
//!
//! cargo run --release --example compare_strategies [out.csv]

use fedfeat::harness::{run_experiment, write_metrics, ExperimentConfig};

fn main() -> fedfeat::Result<()> {
    let cfg = ExperimentConfig::default();
    let metrics = run_experiment(&cfg)?;
    println!("{:<8} {:>9} {:>9} {:>14} {:>14}", "strategy", "round 1", "final", "bytes/round", "measured");
    for m in metrics.iter().filter(|m| m.round == cfg.rounds) {
        let first = metrics
            .iter()
            .find(|r| r.strategy == m.strategy && r.round == 1)
            .expect("round 1 exists");
        println!(
            "{:<8} {:>9.3} {:>9.3} {:>14} {:>14}",
            m.strategy.to_string(),
            first.accuracy,
            m.accuracy,
            first.bytes_symbolic,
            first.bytes_measured
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        write_metrics(&metrics, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
