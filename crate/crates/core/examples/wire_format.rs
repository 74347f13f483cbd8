//! Encodes each message kind and shows the header/payload split the cost
//! accounting is based on.
//!
//! cargo run --example wire_format

use fedfeat::cost::wire::{decode, encode};
use fedfeat::federation::{ClassMeans, LabeledFeatures, RoundMessage, WeightSnapshot};
use fedfeat::nn::init_params;
use ndarray::{Array1, Array2};

fn main() -> fedfeat::Result<()> {
    let mut means = ClassMeans::new(128);
    for class in 0..21 {
        means.insert(class, Array1::from_elem(128, 0.25), 5)?;
    }
    let messages = [
        (
            "weights 8-64-32-16",
            RoundMessage::WeightSnapshot(WeightSnapshot {
                backbone: init_params(0, &[8, 64, 32, 16])?,
                head: None,
            }),
        ),
        ("21 class means, d=128", RoundMessage::ClassMeanFeatures(means)),
        (
            "10 labeled features, d=16",
            RoundMessage::LabeledFeatureSet(LabeledFeatures::new(Array2::ones((10, 16)), (0..10).collect())?),
        ),
    ];
    for (name, msg) in &messages {
        let (bytes, size) = encode(msg)?;
        let same = decode(&bytes)? == *msg;
        println!(
            "{name:<26} header {:>4} B  payload {:>6} B  round trip {}",
            size.header,
            size.payload,
            if same { "exact" } else { "lossy" }
        );
    }
    Ok(())
}
