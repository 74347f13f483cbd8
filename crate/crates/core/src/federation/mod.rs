//! Client/server state, round orchestration and the six communication
//! strategies.
//!
//! Every value that crosses the client/server boundary is a [`RoundMessage`]
//! pushed through a [`Network`], which encodes it to the canonical wire
//! format, counts the bytes and hands the decoded copy to the receiver. All
//! aggregation happens in ascending client id and ascending class id order,
//! so results do not depend on how client training is scheduled.

mod aggregate;
mod client;
mod message;
mod network;
mod round;
mod strategy;

pub use aggregate::{aggregate_class_means, average_weights, regularize_backbone};
pub use client::{
    assign_head, client_local_train, per_class_mean_features, shard_loss, ClientState, LocalTraining, LossKind,
    TrainReport,
};
pub use message::{ClassMean, ClassMeans, LabeledFeatures, RoundMessage, WeightSnapshot};
pub use network::{Network, Traffic};
pub use round::{Federation, FederationConfig, RoundReport, ServerState};
pub use strategy::Strategy;
