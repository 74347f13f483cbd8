use std::time::Instant;

use crate::cost::{scheduled_round_cost, CostModel};
use crate::data::{dirichlet_partition, load_csv, split, synth_generate, Dataset, Partition};
use crate::federation::{Federation, Strategy};
use crate::Result;

use super::{ExperimentConfig, RoundMetrics};

/// Data shared by every strategy of one experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    pub partition: Partition,
}

/// Generates or loads the dataset, splits it and partitions the training
/// side across clients. Depends only on the data keys and the seed.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let full = match &cfg.csv_path {
        Some(path) => load_csv(path)?,
        None => synth_generate(&cfg.synth_config())?,
    };
    let (train, val) = split(&full, cfg.test_fraction, cfg.seed)?;
    let partition = dirichlet_partition(&train, cfg.n_clients, cfg.alpha, cfg.seed)?;
    Ok(PreparedData { train, val, partition })
}

/// Cost-model inputs of a federation: its snapshot size (unless overridden),
/// embedding width, client count, class count and training-set size.
pub fn cost_model_for(fed: &Federation, cfg: &ExperimentConfig) -> Result<CostModel> {
    let train = fed.train_set();
    CostModel::new(
        cfg.w_bytes.unwrap_or_else(|| fed.snapshot_payload_bytes()),
        cfg.embedding_dim as u64,
        cfg.n_clients as u64,
        train.n_classes() as u64,
        train.len() as u64,
    )
}

/// Runs one strategy on prepared data: a round-0 evaluation, then one
/// metrics row per round.
pub fn run_strategy(strategy: Strategy, cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<RoundMetrics>> {
    let start = Instant::now();
    let mut fed = Federation::new(strategy, cfg.federation_config()?, &data.train, &data.partition)?;
    let model = cost_model_for(&fed, cfg)?;
    let mut out = vec![RoundMetrics {
        round: 0,
        strategy,
        accuracy: fed.evaluate(&data.val)?,
        bytes_symbolic: 0,
        bytes_measured: 0,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }];
    for _ in 0..cfg.rounds {
        let start = Instant::now();
        let report = fed.run_round()?;
        let accuracy = fed.evaluate(&data.val)?;
        out.push(RoundMetrics {
            round: report.round,
            strategy,
            accuracy,
            bytes_symbolic: scheduled_round_cost(strategy, &model, report.round == cfg.rounds),
            bytes_measured: report.traffic.payload_bytes,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(out)
}

/// Full pipeline for every selected strategy on one shared split and
/// partition. Rows are grouped by strategy, rounds ascending.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RoundMetrics>> {
    let data = prepare_data(cfg)?;
    let mut out = Vec::new();
    for strategy in cfg.strategy.strategies() {
        out.extend(run_strategy(strategy, cfg, &data)?);
    }
    Ok(out)
}
