//! Federated-learning simulator for weight- and feature-based communication.
//!
//! Six server/client strategies are implemented on top of a small dense
//! backbone:
//!
//! 1. full-weight averaging (FedAVG),
//! 2. per-class mean feature exchange, where the averaged class means become
//!    each client's cosine head,
//! 3. feature exchange plus pull-back of every backbone towards a shared
//!    random initialization,
//! 4. weight averaging followed by feature exchange,
//! 5. strategy 4 with kNN retrieval over every training feature,
//! 6. strategy 4 with kNN retrieval over per-class mean features.
//!
//! The crate also carries the margin loss family used for training, a
//! non-IID Dirichlet partitioner, a canonical wire encoding for everything
//! that crosses the client/server boundary, and the closed-form byte-cost
//! model those messages are checked against.
//!
//! Everything is deterministic given a seed. See the `examples/` directory
//! for one runnable program per capability.

pub mod cost;
pub mod data;
pub mod error;
pub mod federation;
pub mod harness;
pub mod losses;
pub mod nn;
pub mod retrieval;
pub mod seed;

pub use error::{Error, Result};
