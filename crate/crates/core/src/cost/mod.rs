//! Bytes-on-wire accounting.
//!
//! [`round_cost`] gives the closed-form payload bytes one training round
//! sends under each strategy; [`wire`] defines the byte layout those payloads
//! are measured against.
//!
//! | strategy | bytes per round |
//! |---|---|
//! | 1 | `A = 2 · w · n_clients` |
//! | 2, 3 | `B = 2 · d · n_classes · n_clients · 4` |
//! | 4 | `A + B` |
//! | 5 | `A + n_samples · (2 + d · n_clients²) · 4` |
//! | 6 | `A + n_clients · B` |
//!
//! `w` is already in bytes; every other term counts `f32` scalars.

pub mod wire;

pub use wire::{measure_message, MessageSize};

use crate::federation::Strategy;
use crate::{Error, Result};

/// Wire size of one scalar (`f32`).
pub const BYTES_PER_SCALAR: u64 = 4;

/// Sizes entering the per-round byte formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    /// Serialized model size in bytes.
    pub w_bytes: u64,
    /// Embedding dimension.
    pub d: u64,
    pub n_clients: u64,
    pub n_classes: u64,
    /// Training samples.
    pub n_samples: u64,
}

impl CostModel {
    pub fn new(w_bytes: u64, d: u64, n_clients: u64, n_classes: u64, n_samples: u64) -> Result<Self> {
        for (field, v) in [
            ("w_bytes", w_bytes),
            ("d", d),
            ("n_clients", n_clients),
            ("n_classes", n_classes),
            ("n_samples", n_samples),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be > 0"));
            }
        }
        Ok(Self {
            w_bytes,
            d,
            n_clients,
            n_classes,
            n_samples,
        })
    }

    /// UC-Merced setting: ResNet18 weights, 21 classes, 10 clients,
    /// 1470 training images.
    pub fn ucm() -> Self {
        Self {
            w_bytes: 44_993_804,
            d: 128,
            n_clients: 10,
            n_classes: 21,
            n_samples: 1470,
        }
    }

    /// AID setting: 30 classes, 20 clients, 7000 training images.
    pub fn aid() -> Self {
        Self {
            n_clients: 20,
            n_classes: 30,
            n_samples: 7000,
            ..Self::ucm()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "ucm" => Ok(Self::ucm()),
            "aid" => Ok(Self::aid()),
            other => Err(Error::config("preset", format!("unknown preset `{other}`; expected ucm or aid"))),
        }
    }

    fn weights_term(&self) -> u64 {
        2 * self.w_bytes * self.n_clients
    }

    fn features_term(&self) -> u64 {
        2 * self.d * self.n_classes * self.n_clients * BYTES_PER_SCALAR
    }
}

/// Payload bytes sent during one round that includes the strategy's full
/// exchange. The non-communicating reference costs nothing.
pub fn round_cost(strategy: Strategy, model: &CostModel) -> u64 {
    let a = model.weights_term();
    let b = model.features_term();
    match strategy {
        Strategy::NonFed => 0,
        Strategy::FedAvg => a,
        Strategy::FeatureMeans | Strategy::RegularizedFeatureMeans => b,
        Strategy::ModelAndFeatures => a + b,
        Strategy::RetrievalAllFeatures => {
            a + model.n_samples * (2 + model.d * model.n_clients * model.n_clients) * BYTES_PER_SCALAR
        }
        Strategy::RetrievalClassMeans => a + model.n_clients * b,
    }
}

/// Cost of a given round of a run. Strategies 5 and 6 exchange their
/// retrieval features only in the final round; earlier rounds cost the same
/// as strategy 4.
pub fn scheduled_round_cost(strategy: Strategy, model: &CostModel, final_round: bool) -> u64 {
    if strategy.uses_retrieval() && !final_round {
        round_cost(Strategy::ModelAndFeatures, model)
    } else {
        round_cost(strategy, model)
    }
}

/// Human-readable form of the formula behind [`round_cost`].
pub fn formula(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::NonFed => "0",
        Strategy::FedAvg => "A = 2*w*n_clients",
        Strategy::FeatureMeans => "B = 2*d*n_classes*n_clients*4",
        Strategy::RegularizedFeatureMeans => "B",
        Strategy::ModelAndFeatures => "A + B",
        Strategy::RetrievalAllFeatures => "A + n_samples*(2 + d*n_clients^2)*4",
        Strategy::RetrievalClassMeans => "A + n_clients*B",
    }
}
