use std::collections::BTreeMap;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;

use super::ClassMeans;
use crate::data::Dataset;
use crate::losses::{arcface_loss, arcface_loss_grad, linear_softmax_loss_grad, softmax_ce, MarginConfig};
use crate::nn::{self, adam_step, AdamState, BackboneParams, Head, HeadParams, Model, Parameters};
use crate::retrieval::FeatureBank;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Cross-entropy over a biased linear head.
    Softmax,
    /// Additive angular margin loss over a cosine head.
    ArcFace(MarginConfig),
}

/// Local optimization settings for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTraining {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    /// When false the head is held fixed and only the backbone learns.
    pub train_head: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainReport {
    pub steps: usize,
    /// Mean minibatch loss over the last epoch.
    pub last_epoch_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub model: Model,
    /// Moments for the trainable parameters (backbone, then head if trained).
    pub adam: AdamState,
    /// Indices into the shared training set.
    pub shard: Vec<usize>,
    /// Shared initial backbone, kept only by the regularized strategy.
    pub m0: Option<BackboneParams>,
    /// kNN bank, filled after the final round of the retrieval strategies.
    pub bank: Option<FeatureBank>,
}

impl ClientState {
    pub fn new(id: usize, model: Model, shard: Vec<usize>, train_head: bool) -> Self {
        let n = if train_head {
            model.num_params()
        } else {
            model.backbone.num_params()
        };
        Self {
            id,
            model,
            adam: AdamState::new(n),
            shard,
            m0: None,
            bank: None,
        }
    }

    pub fn cosine_head(&self) -> Result<&HeadParams> {
        self.model
            .head
            .as_cosine()
            .ok_or_else(|| Error::config("head", format!("client {} has no cosine head", self.id)))
    }
}

fn batch_loss_grad(head: &Head, loss: LossKind, emb: &ndarray::Array2<f64>, labels: &[usize]) -> Result<crate::losses::LossGrad> {
    match (loss, head) {
        (LossKind::Softmax, Head::Softmax(h)) => linear_softmax_loss_grad(emb.view(), h, labels),
        (LossKind::ArcFace(cfg), Head::Cosine(h)) => arcface_loss_grad(emb.view(), h.anchors(), labels, cfg),
        _ => Err(Error::config("loss", "loss kind does not match the head type")),
    }
}

/// `epochs` shuffled minibatch passes over the client's shard with Adam.
/// An empty shard leaves the state untouched.
pub fn client_local_train<R: Rng + ?Sized>(
    state: &mut ClientState,
    train: &Dataset,
    opts: &LocalTraining,
    rng: &mut R,
) -> Result<TrainReport> {
    if opts.batch_size == 0 {
        return Err(Error::config("batch_size", "must be >= 1"));
    }
    let mut report = TrainReport::default();
    if state.shard.is_empty() {
        return Ok(report);
    }
    let n_trainable = if opts.train_head {
        state.model.num_params()
    } else {
        state.model.backbone.num_params()
    };
    if state.adam.len() != n_trainable {
        return Err(Error::Shape(format!(
            "client {}: optimizer tracks {} parameters, {} are trainable",
            state.id,
            state.adam.len(),
            n_trainable
        )));
    }
    let mut order = state.shard.clone();
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(opts.batch_size) {
            let inputs = train.rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            let mut head_grads = None;
            let (loss, backbone_grads) = nn::grad(&state.model.backbone, inputs.view(), |emb| {
                let g = batch_loss_grad(&state.model.head, opts.loss, emb, &labels)?;
                head_grads = Some((g.d_head, g.d_bias));
                Ok((g.loss, g.d_embeddings))
            })?;
            let mut grads = backbone_grads.to_flat();
            let mut params = if opts.train_head {
                let (d_head, d_bias) = head_grads.expect("loss closure ran");
                grads.extend(d_head.iter());
                if let Some(b) = d_bias {
                    grads.extend(b.iter());
                }
                state.model.to_flat()
            } else {
                state.model.backbone.to_flat()
            };
            adam_step(&mut params, &grads, &mut state.adam, opts.lr)?;
            if opts.train_head {
                state.model = state.model.with_flat(&params)?;
            } else {
                state.model.backbone = state.model.backbone.with_flat(&params)?;
            }
            epoch_loss += loss;
            batches += 1;
            report.steps += 1;
        }
        report.last_epoch_loss = Some(epoch_loss / batches as f64);
    }
    Ok(report)
}

/// Mean loss of the current model over the whole shard; `None` when empty.
pub fn shard_loss(state: &ClientState, train: &Dataset, loss: LossKind) -> Result<Option<f64>> {
    if state.shard.is_empty() {
        return Ok(None);
    }
    let emb = nn::forward(&state.model.backbone, train.rows(&state.shard).view())?;
    let labels: Vec<usize> = state.shard.iter().map(|&i| train.labels()[i]).collect();
    let value = match (loss, &state.model.head) {
        (LossKind::Softmax, Head::Softmax(h)) => softmax_ce(h.logits(emb.view())?.view(), &labels)?,
        (LossKind::ArcFace(cfg), Head::Cosine(h)) => arcface_loss(emb.view(), h.anchors(), &labels, cfg)?,
        _ => return Err(Error::config("loss", "loss kind does not match the head type")),
    };
    Ok(Some(value))
}

/// Mean backbone embedding per class present in the client's shard.
pub fn per_class_mean_features(state: &ClientState, train: &Dataset) -> Result<ClassMeans> {
    let dim = state.model.backbone.output_dim();
    let mut out = ClassMeans::new(dim);
    if state.shard.is_empty() {
        return Ok(out);
    }
    let emb = nn::forward(&state.model.backbone, train.rows(&state.shard).view())?;
    let mut sums: BTreeMap<usize, (Array1<f64>, usize)> = BTreeMap::new();
    for (row, &i) in emb.rows().into_iter().zip(&state.shard) {
        let slot = sums
            .entry(train.labels()[i])
            .or_insert_with(|| (Array1::zeros(dim), 0));
        slot.0 += &row;
        slot.1 += 1;
    }
    for (class, (sum, count)) in sums {
        out.insert(class, sum / count as f64, count)?;
    }
    Ok(out)
}

/// Writes normalized means into `head`; classes absent from `means` keep
/// their rows. Validates every entry before touching the head.
pub(crate) fn apply_means(head: &mut HeadParams, means: &ClassMeans) -> Result<()> {
    if means.dim() != head.dim() {
        return Err(Error::Shape(format!("means have dim {}, head has {}", means.dim(), head.dim())));
    }
    let mut rows = Vec::with_capacity(means.len());
    for (class, entry) in means.iter() {
        if class >= head.n_classes() {
            return Err(Error::Label {
                label: class,
                n_classes: head.n_classes(),
            });
        }
        rows.push((class, nn::l2_normalize(entry.mean.view())?));
    }
    for (class, row) in rows {
        head.set_row(class, &row);
    }
    Ok(())
}

/// Replaces the client's head anchors with the received class means.
pub fn assign_head(state: &mut ClientState, means: &ClassMeans) -> Result<()> {
    let id = state.id;
    let head = state
        .model
        .head
        .as_cosine_mut()
        .ok_or_else(|| Error::config("head", format!("client {id} has no cosine head")))?;
    apply_means(head, means)
}
