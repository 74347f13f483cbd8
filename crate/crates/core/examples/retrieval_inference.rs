//! kNN inference over exchanged features, on its own and inside the two
//! retrieval strategies.
//!
//! cargo run --release --example retrieval_inference

use fedfeat::data::{dirichlet_partition, split, synth_generate, SynthConfig};
use fedfeat::federation::{Federation, FederationConfig, Strategy};
use fedfeat::retrieval::{knn_fit, Metric};
use ndarray::array;

fn main() -> fedfeat::Result<()> {
    let bank = knn_fit(array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [-1.0, 0.2]], vec![0, 0, 1, 2], Metric::Cosine)?;
    let query = array![0.7, 0.6];
    for n in bank.neighbors(query.view(), 3)? {
        println!("neighbor {} label {} distance {:.4}", n.index, n.label, n.distance);
    }
    println!("k=1 -> {}, k=3 -> {}\n", bank.predict(query.view(), 1)?, bank.predict(query.view(), 3)?);

    let full = synth_generate(&SynthConfig::default())?;
    let (train, val) = split(&full, 0.3, 2)?;
    let partition = dirichlet_partition(&train, 10, 0.5, 2)?;
    for strategy in [Strategy::RetrievalAllFeatures, Strategy::RetrievalClassMeans] {
        let cfg = FederationConfig {
            rounds: 4,
            ..Default::default()
        };
        let mut fed = Federation::new(strategy, cfg, &train, &partition)?;
        let mut bytes = 0;
        for _ in 0..4 {
            bytes += fed.run_round()?.traffic.payload_bytes;
        }
        let bank_sizes: Vec<usize> = fed.clients().iter().map(|c| c.bank.as_ref().map_or(0, |b| b.len())).collect();
        println!(
            "strategy {strategy}: kNN accuracy {:.3}, bank sizes {bank_sizes:?}, {bytes} payload bytes",
            fed.evaluate(&val)?
        );
    }
    Ok(())
}
