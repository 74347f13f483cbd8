//! Per-class mean feature exchange, with and without pulling each backbone
//! back towards the shared initialization.
//!
//! cargo run --release --example feature_exchange

use fedfeat::data::{dirichlet_partition, split, synth_generate, SynthConfig};
use fedfeat::federation::{Federation, FederationConfig, Strategy};

fn main() -> fedfeat::Result<()> {
    let full = synth_generate(&SynthConfig::default())?;
    let (train, val) = split(&full, 0.3, 1)?;
    let partition = dirichlet_partition(&train, 10, 0.5, 1)?;
    for strategy in [Strategy::FeatureMeans, Strategy::RegularizedFeatureMeans] {
        let cfg = FederationConfig {
            rounds: 6,
            ..Default::default()
        };
        let mut fed = Federation::new(strategy, cfg, &train, &partition)?;
        print!("strategy {strategy}: {:.3}", fed.evaluate(&val)?);
        for _ in 0..6 {
            let report = fed.run_round()?;
            print!(" -> {:.3} ({} B)", fed.evaluate(&val)?, report.traffic.payload_bytes);
        }
        println!();
        let head = fed.clients()[0].cosine_head()?;
        println!("  client 0 anchors unit norm: {}", head.rows_unit_norm(1e-12));
    }
    Ok(())
}
