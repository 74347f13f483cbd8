//! How the Dirichlet concentration skews client label distributions.
//!
//! cargo run --example dirichlet_shards

use fedfeat::data::{count_entropy, dirichlet_partition, split, synth_generate, SynthConfig};

fn main() -> fedfeat::Result<()> {
    let full = synth_generate(&SynthConfig::default())?;
    let (train, val) = split(&full, 0.3, 0)?;
    println!("{} train / {} validation samples, {} classes\n", train.len(), val.len(), train.n_classes());

    for alpha in [0.1, 0.5, 1e6] {
        let part = dirichlet_partition(&train, 5, alpha, 0)?;
        println!("alpha = {alpha}");
        for (client, counts) in part.class_counts(&train).iter().enumerate() {
            println!("  client {client}: {counts:?}  entropy {:.2}", count_entropy(counts));
        }
    }
    Ok(())
}
