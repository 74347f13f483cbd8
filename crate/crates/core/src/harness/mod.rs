//! Experiment runner: configuration, the end-to-end pipeline, metrics CSV
//! output and the cost table.

mod config;
mod metrics;
mod run;

pub use config::{ExperimentConfig, StrategySelection};
pub use metrics::{read_metrics, write_metrics, write_metrics_to, RoundMetrics, METRICS_HEADER};
pub use run::{cost_model_for, prepare_data, run_experiment, run_strategy, PreparedData};

use crate::cost::{formula, round_cost, CostModel};
use crate::federation::Strategy;

/// One line per strategy: id, symbolic formula and bytes per round.
pub fn cost_table(model: &CostModel) -> String {
    let mut out = format!(
        "w_bytes={} d={} n_clients={} n_classes={} n_samples={}\n{:<9} {:<40} {:>16}\n",
        model.w_bytes, model.d, model.n_clients, model.n_classes, model.n_samples, "strategy", "formula", "bytes"
    );
    for s in Strategy::NUMBERED {
        out.push_str(&format!("{:<9} {:<40} {:>16}\n", s.to_string(), formula(s), round_cost(s, model)));
    }
    out
}
