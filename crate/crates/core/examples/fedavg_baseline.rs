//! Full-weight averaging: local training, upload, average, broadcast.
//!
//! cargo run --release --example fedavg_baseline

use fedfeat::data::{dirichlet_partition, split, synth_generate, SynthConfig};
use fedfeat::federation::{Federation, FederationConfig, Strategy};

fn main() -> fedfeat::Result<()> {
    let full = synth_generate(&SynthConfig::default())?;
    let (train, val) = split(&full, 0.3, 0)?;
    let partition = dirichlet_partition(&train, 10, 0.5, 0)?;
    // a larger step than the default so progress shows within a few rounds
    let cfg = FederationConfig {
        rounds: 8,
        lr: 1e-2,
        ..Default::default()
    };
    let mut fed = Federation::new(Strategy::FedAvg, cfg, &train, &partition)?;
    println!("round 0: accuracy {:.3}", fed.evaluate(&val)?);
    for _ in 0..8 {
        let report = fed.run_round()?;
        println!(
            "round {}: accuracy {:.3}, train loss {:.3}, {} messages, {} payload bytes",
            report.round,
            fed.evaluate(&val)?,
            report.mean_train_loss.unwrap_or(f64::NAN),
            report.traffic.messages,
            report.traffic.payload_bytes,
        );
    }
    Ok(())
}
