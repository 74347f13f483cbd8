use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::client::apply_means;
use super::{
    aggregate_class_means, assign_head, average_weights, client_local_train, per_class_mean_features,
    regularize_backbone, ClassMeans, ClientState, LabeledFeatures, LocalTraining, LossKind, Network, RoundMessage,
    Strategy, Traffic, WeightSnapshot,
};
use crate::data::{Dataset, Partition};
use crate::losses::{cosine_logits, MarginConfig};
use crate::nn::{self, init_params, BackboneParams, Head, HeadParams, LinearHead, Model, Parameters};
use crate::retrieval::{knn_fit, Metric};
use crate::seed::{self, Stream};
use crate::{Error, Result};

/// Federation-wide hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub n_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Hidden layer widths between the input and the embedding.
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub margin: MarginConfig,
    /// Dirichlet concentration used to build the partition.
    pub alpha: f64,
    pub seed: u64,
    /// Neighbors for kNN; `None` picks 5 for strategy 5 and 1 for strategy 6.
    pub knn_k: Option<usize>,
    pub knn_metric: Metric,
    /// Whether strategies 4–6 average the cosine head with the backbone.
    pub average_head: bool,
    /// Train clients on the rayon pool.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            n_clients: 10,
            rounds: 16,
            local_epochs: 1,
            batch_size: 16,
            lr: 1e-4,
            hidden: vec![64, 32],
            embedding_dim: 16,
            margin: MarginConfig::default(),
            alpha: 0.5,
            seed: 0,
            knn_k: None,
            knn_metric: Metric::Cosine,
            average_head: true,
            parallel: false,
        }
    }
}

impl FederationConfig {
    pub fn arch(&self, d_in: usize) -> Vec<usize> {
        std::iter::once(d_in)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.embedding_dim))
            .collect()
    }

    pub fn knn_k_for(&self, strategy: Strategy) -> usize {
        self.knn_k.unwrap_or(match strategy {
            Strategy::RetrievalClassMeans => 1,
            _ => 5,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::config("n_clients", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if self.embedding_dim == 0 {
            return Err(Error::config("embedding_dim", "must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", format!("must be finite and >= 0, got {}", self.lr)));
        }
        if self.knn_k == Some(0) {
            return Err(Error::config("knn_k", "must be >= 1"));
        }
        Ok(())
    }
}

/// Server side of a federation.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub strategy: Strategy,
    /// Aggregated model; only the weight-averaging strategies keep one.
    pub global_model: Option<Model>,
    pub round: usize,
}

/// What one call to [`Federation::run_round`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub traffic: Traffic,
    /// Mean over clients with data of their last-epoch training loss.
    pub mean_train_loss: Option<f64>,
}

/// A server, its clients and the shared training data.
#[derive(Debug, Clone)]
pub struct Federation {
    strategy: Strategy,
    cfg: FederationConfig,
    train: Dataset,
    server: ServerState,
    clients: Vec<ClientState>,
    network: Network,
}

impl Federation {
    /// Builds the initial state. Weight-averaging strategies start every
    /// client from the server's model; strategy 3 shares one initialization
    /// `M0`; strategy 2 and the reference initialize each client separately.
    pub fn new(strategy: Strategy, cfg: FederationConfig, train: &Dataset, partition: &Partition) -> Result<Self> {
        cfg.validate()?;
        if partition.n_clients() != cfg.n_clients {
            return Err(Error::config(
                "n_clients",
                format!("partition has {} shards, config wants {}", partition.n_clients(), cfg.n_clients),
            ));
        }
        if let Some(&bad) = partition.shards.iter().flatten().find(|&&i| i >= train.len()) {
            return Err(Error::Parameter(format!("shard index {bad} outside the training set")));
        }
        let arch = cfg.arch(train.dim());
        let n_classes = train.n_classes();
        let make_model = |slot: u64| -> Result<Model> {
            let backbone = init_params(seed::derive(cfg.seed, Stream::Init, slot, 0), &arch)?;
            let head_seed = seed::derive(cfg.seed, Stream::Init, slot, 1);
            let head = if strategy.uses_softmax_head() {
                Head::Softmax(LinearHead::init(head_seed, n_classes, cfg.embedding_dim))
            } else {
                Head::Cosine(HeadParams::random(head_seed, n_classes, cfg.embedding_dim)?)
            };
            Ok(Model { backbone, head })
        };
        let shared = make_model(0)?;
        let independent_init = matches!(strategy, Strategy::FeatureMeans | Strategy::NonFed);
        let clients = partition
            .shards
            .iter()
            .enumerate()
            .map(|(id, shard)| {
                let model = if independent_init {
                    make_model(id as u64 + 1)?
                } else {
                    shared.clone()
                };
                let mut client = ClientState::new(id, model, shard.clone(), strategy.trains_head());
                if strategy == Strategy::RegularizedFeatureMeans {
                    client.m0 = Some(shared.backbone.clone());
                }
                Ok(client)
            })
            .collect::<Result<Vec<_>>>()?;
        let server = ServerState {
            strategy,
            global_model: strategy.keeps_global_model().then_some(shared),
            round: 0,
        };
        Ok(Self {
            strategy,
            cfg,
            train: train.clone(),
            server,
            clients,
            network: Network::new(),
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn config(&self) -> &FederationConfig {
        &self.cfg
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn clients_mut(&mut self) -> &mut [ClientState] {
        &mut self.clients
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    /// The model a weight snapshot carries for this strategy.
    pub fn snapshot(&self, model: &Model) -> WeightSnapshot {
        let with_head = self.strategy == Strategy::FedAvg || self.cfg.average_head;
        WeightSnapshot {
            backbone: model.backbone.clone(),
            head: with_head.then(|| model.head.clone()),
        }
    }

    /// Payload size of one weight snapshot: the `w` of the cost model.
    pub fn snapshot_payload_bytes(&self) -> u64 {
        let snap = self.snapshot(&self.clients[0].model);
        let n = snap.backbone.num_params() + snap.head.as_ref().map_or(0, |h| h.num_params());
        n as u64 * crate::cost::BYTES_PER_SCALAR
    }

    fn local_training(&self) -> LocalTraining {
        LocalTraining {
            epochs: self.cfg.local_epochs,
            lr: self.cfg.lr,
            batch_size: self.cfg.batch_size,
            loss: if self.strategy.uses_softmax_head() {
                LossKind::Softmax
            } else {
                LossKind::ArcFace(self.cfg.margin)
            },
            train_head: self.strategy.trains_head(),
        }
    }

    fn train_clients(&mut self, round: usize) -> Result<Option<f64>> {
        let opts = self.local_training();
        let train = &self.train;
        let seed = self.cfg.seed;
        let step = |c: &mut ClientState| {
            let mut rng = seed::derived_rng(seed, Stream::LocalTrain, c.id as u64, round as u64);
            client_local_train(c, train, &opts, &mut rng)
        };
        let reports: Vec<_> = if self.cfg.parallel {
            self.clients.par_iter_mut().map(step).collect::<Result<_>>()?
        } else {
            self.clients.iter_mut().map(step).collect::<Result<_>>()?
        };
        let losses: Vec<f64> = reports.iter().filter_map(|r| r.last_epoch_loss).collect();
        Ok((!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64))
    }

    /// Weight upload, averaging and broadcast.
    fn sync_weights(&mut self) -> Result<()> {
        let mut uploads = Vec::with_capacity(self.clients.len());
        for c in &self.clients {
            match self.network.send(&RoundMessage::WeightSnapshot(self.snapshot(&c.model)))? {
                RoundMessage::WeightSnapshot(s) => uploads.push(s),
                _ => unreachable!("decode preserves the message kind"),
            }
        }
        let backbones: Vec<BackboneParams> = uploads.iter().map(|s| s.backbone.clone()).collect();
        let backbone = average_weights(&backbones)?;
        let head = match uploads.iter().map(|s| s.head.clone()).collect::<Option<Vec<Head>>>() {
            Some(heads) => Some(average_weights(&heads)?),
            None => None,
        };
        let average = RoundMessage::WeightSnapshot(WeightSnapshot { backbone, head });
        let mut received = None;
        for c in &mut self.clients {
            let RoundMessage::WeightSnapshot(s) = self.network.send(&average)? else {
                unreachable!("decode preserves the message kind")
            };
            c.model.backbone = s.backbone.clone();
            if let Some(h) = s.head.clone() {
                c.model.head = h;
            }
            received.get_or_insert(s);
        }
        let s = received.expect("at least one client");
        let global = self.server.global_model.as_mut().expect("weight-averaging strategies keep a global model");
        global.backbone = s.backbone;
        if let Some(h) = s.head {
            global.head = h;
        }
        Ok(())
    }

    /// Per-class mean upload, aggregation, broadcast and head assignment.
    /// Returns each client's own upload.
    fn sync_features(&mut self) -> Result<Vec<ClassMeans>> {
        let mut own = Vec::with_capacity(self.clients.len());
        let mut uploads = Vec::with_capacity(self.clients.len());
        for c in &self.clients {
            let means = per_class_mean_features(c, &self.train)?;
            let RoundMessage::ClassMeanFeatures(m) = self.network.send(&RoundMessage::ClassMeanFeatures(means.clone()))? else {
                unreachable!("decode preserves the message kind")
            };
            own.push(means);
            uploads.push(m);
        }
        let aggregated = RoundMessage::ClassMeanFeatures(aggregate_class_means(&uploads)?);
        let mut first = None;
        for c in &mut self.clients {
            let RoundMessage::ClassMeanFeatures(m) = self.network.send(&aggregated)? else {
                unreachable!("decode preserves the message kind")
            };
            assign_head(c, &m)?;
            first.get_or_insert(m);
        }
        if let Some(global) = self.server.global_model.as_mut() {
            if let (Some(head), Some(m)) = (global.head.as_cosine_mut(), first.as_ref()) {
                apply_means(head, m)?;
            }
        }
        Ok(own)
    }

    /// Every client's features relayed to every other client; each client
    /// fits a kNN bank on its own features plus what it received.
    fn prepare_retrieval(&mut self, class_means: Vec<ClassMeans>) -> Result<()> {
        let outgoing: Vec<RoundMessage> = match self.strategy {
            Strategy::RetrievalClassMeans => class_means.into_iter().map(RoundMessage::ClassMeanFeatures).collect(),
            Strategy::RetrievalAllFeatures => self
                .clients
                .iter()
                .map(|c| {
                    let vectors = nn::forward(&c.model.backbone, self.train.rows(&c.shard).view())?;
                    let labels = c.shard.iter().map(|&i| self.train.labels()[i]).collect();
                    Ok(RoundMessage::LabeledFeatureSet(LabeledFeatures::new(vectors, labels)?))
                })
                .collect::<Result<_>>()?,
            _ => return Ok(()),
        };
        let n = self.clients.len();
        let mut banks: Vec<Vec<LabeledFeatures>> = vec![Vec::with_capacity(n); n];
        for (src, msg) in outgoing.iter().enumerate() {
            for (dst, bank) in banks.iter_mut().enumerate() {
                let delivered = if src == dst { msg.clone() } else { self.network.relay(msg)? };
                bank.push(as_labeled(delivered)?);
            }
        }
        let k_metric = self.cfg.knn_metric;
        let dim = self.cfg.embedding_dim;
        for (client, parts) in self.clients.iter_mut().zip(banks) {
            let labels: Vec<usize> = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
            let views: Vec<ArrayView2<'_, f64>> = parts.iter().map(|p| p.vectors.view()).collect();
            let vectors = if views.is_empty() {
                Array2::zeros((0, dim))
            } else {
                ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?
            };
            client.bank = Some(knn_fit(vectors, labels, k_metric)?);
        }
        Ok(())
    }

    /// Runs one communication round.
    pub fn run_round(&mut self) -> Result<RoundReport> {
        let round = self.server.round + 1;
        let mean_train_loss = self.train_clients(round)?;
        let final_round = round == self.cfg.rounds;
        match self.strategy {
            Strategy::NonFed => {}
            Strategy::FedAvg => self.sync_weights()?,
            Strategy::FeatureMeans => {
                self.sync_features()?;
            }
            Strategy::RegularizedFeatureMeans => {
                self.sync_features()?;
                let n = self.clients.len();
                for c in &mut self.clients {
                    let m0 = c.m0.as_ref().expect("strategy 3 clients keep M0");
                    c.model.backbone = regularize_backbone(m0, &c.model.backbone, n)?;
                }
            }
            Strategy::ModelAndFeatures | Strategy::RetrievalAllFeatures | Strategy::RetrievalClassMeans => {
                self.sync_weights()?;
                let own = self.sync_features()?;
                if final_round && self.strategy.uses_retrieval() {
                    self.prepare_retrieval(own)?;
                }
            }
        }
        self.server.round = round;
        Ok(RoundReport {
            round,
            traffic: self.network.take_traffic(),
            mean_train_loss,
        })
    }

    /// Validation accuracy under the strategy's prediction rule.
    ///
    /// Strategy 1 uses the server's softmax head. Every other strategy
    /// averages per-client accuracy: softmax argmax for the reference,
    /// cosine-anchor argmax for 2–4, and kNN for 5–6 once the banks exist.
    pub fn evaluate(&self, val: &Dataset) -> Result<f64> {
        if val.is_empty() {
            return Err(Error::config("validation set", "is empty"));
        }
        if self.strategy == Strategy::FedAvg {
            let global = self.server.global_model.as_ref().expect("strategy 1 keeps a global model");
            return model_accuracy(global, val);
        }
        let k = self.cfg.knn_k_for(self.strategy);
        let mut total = 0.0;
        for c in &self.clients {
            total += match &c.bank {
                Some(bank) => {
                    let emb = nn::forward(&c.model.backbone, val.inputs())?;
                    let mut correct = 0usize;
                    for (row, &y) in emb.rows().into_iter().zip(val.labels()) {
                        if bank.predict(row, k)? == y {
                            correct += 1;
                        }
                    }
                    correct as f64 / val.len() as f64
                }
                None => model_accuracy(&c.model, val)?,
            };
        }
        Ok(total / self.clients.len() as f64)
    }
}

fn as_labeled(msg: RoundMessage) -> Result<LabeledFeatures> {
    match msg {
        RoundMessage::LabeledFeatureSet(f) => Ok(f),
        RoundMessage::ClassMeanFeatures(m) => {
            let labels: Vec<usize> = m.iter().map(|(c, _)| c).collect();
            let mut vectors = Array2::zeros((labels.len(), m.dim()));
            for (mut row, (_, entry)) in vectors.rows_mut().into_iter().zip(m.iter()) {
                row.assign(&entry.mean);
            }
            LabeledFeatures::new(vectors, labels)
        }
        RoundMessage::WeightSnapshot(_) => Err(Error::Parameter("weights cannot seed a feature bank".to_string())),
    }
}

fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of `val` whose argmax score (softmax logits or cosine to the
/// anchors) matches the label. Ties go to the lower class id.
pub(crate) fn model_accuracy(model: &Model, val: &Dataset) -> Result<f64> {
    let emb = nn::forward(&model.backbone, val.inputs())?;
    let scores = match &model.head {
        Head::Softmax(h) => h.logits(emb.view())?,
        Head::Cosine(h) => cosine_logits(emb.view(), h.anchors())?,
    };
    let correct = scores
        .rows()
        .into_iter()
        .zip(val.labels())
        .filter(|(row, &y)| argmax(*row) == y)
        .count();
    Ok(correct as f64 / val.len() as f64)
}
