use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{l2_normalize, BackboneParams, Parameters};
use crate::{seed, Error, Result};

/// Cosine head: one anchor vector per class, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    anchors: Array2<f64>,
}

impl HeadParams {
    pub fn new(anchors: Array2<f64>) -> Result<Self> {
        if let Some(bad) = anchors.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                context: "head anchors",
                value: *bad,
            });
        }
        Ok(Self { anchors })
    }

    /// Random unit-norm anchors (Gaussian directions, rounded to `f32`).
    pub fn random(seed: u64, n_classes: usize, dim: usize) -> Result<Self> {
        let mut rng = seed::rng(seed);
        let mut anchors = Array2::zeros((n_classes, dim));
        for mut row in anchors.rows_mut() {
            let raw: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let unit = l2_normalize(raw.view())?;
            row.assign(&unit.mapv(|v| v as f32 as f64));
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> ArrayView2<'_, f64> {
        self.anchors.view()
    }

    pub fn n_classes(&self) -> usize {
        self.anchors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.anchors.ncols()
    }

    pub(crate) fn set_row(&mut self, class: usize, row: &Array1<f64>) {
        self.anchors.row_mut(class).assign(row);
    }

    pub fn rows_unit_norm(&self, tol: f64) -> bool {
        self.anchors.rows().into_iter().all(|r| (r.dot(&r).sqrt() - 1.0).abs() <= tol)
    }
}

/// Conventional softmax head, `logits = e Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// Shape `[n_classes × d]`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearHead {
    /// Glorot-uniform weights rounded to `f32`, zero bias.
    pub fn init(seed: u64, n_classes: usize, dim: usize) -> Self {
        let mut rng = seed::rng(seed);
        let limit = (6.0 / (n_classes + dim) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((n_classes, dim), || {
            let u: f64 = rng.random();
            (limit * (2.0 * u - 1.0)) as f32 as f64
        });
        Self {
            weights,
            bias: Array1::zeros(n_classes),
        }
    }

    pub fn logits(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if embeddings.ncols() != self.weights.ncols() {
            return Err(Error::Shape(format!(
                "embedding dim {} != head dim {}",
                embeddings.ncols(),
                self.weights.ncols()
            )));
        }
        Ok(embeddings.dot(&self.weights.t()) + &self.bias)
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Softmax(LinearHead),
    Cosine(HeadParams),
}

impl Head {
    pub fn n_classes(&self) -> usize {
        match self {
            Head::Softmax(h) => h.n_classes(),
            Head::Cosine(h) => h.n_classes(),
        }
    }

    pub fn as_cosine(&self) -> Option<&HeadParams> {
        match self {
            Head::Cosine(h) => Some(h),
            Head::Softmax(_) => None,
        }
    }

    pub fn as_cosine_mut(&mut self) -> Option<&mut HeadParams> {
        match self {
            Head::Cosine(h) => Some(h),
            Head::Softmax(_) => None,
        }
    }
}

/// Backbone plus head: everything a weight snapshot carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub backbone: BackboneParams,
    pub head: Head,
}

impl Parameters for HeadParams {
    fn shape_signature(&self) -> Vec<usize> {
        vec![self.anchors.nrows(), self.anchors.ncols()]
    }

    fn num_params(&self) -> usize {
        self.anchors.len()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.anchors.iter().copied().collect()
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!("head has {} parameters, got {}", self.num_params(), flat.len())));
        }
        HeadParams::new(Array2::from_shape_vec(self.anchors.raw_dim(), flat.to_vec()).expect("length checked"))
    }
}

impl Parameters for LinearHead {
    fn shape_signature(&self) -> Vec<usize> {
        vec![self.weights.nrows(), self.weights.ncols(), self.bias.len()]
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.weights.iter().chain(self.bias.iter()).copied().collect()
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!("head has {} parameters, got {}", self.num_params(), flat.len())));
        }
        let (w, b) = flat.split_at(self.weights.len());
        Ok(Self {
            weights: Array2::from_shape_vec(self.weights.raw_dim(), w.to_vec()).expect("length checked"),
            bias: Array1::from(b.to_vec()),
        })
    }
}

impl Parameters for Head {
    fn shape_signature(&self) -> Vec<usize> {
        // leading tag keeps softmax and cosine heads incongruent
        let (tag, rest) = match self {
            Head::Cosine(h) => (1, h.shape_signature()),
            Head::Softmax(h) => (2, h.shape_signature()),
        };
        std::iter::once(tag).chain(rest).collect()
    }

    fn num_params(&self) -> usize {
        match self {
            Head::Cosine(h) => h.num_params(),
            Head::Softmax(h) => h.num_params(),
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        match self {
            Head::Cosine(h) => h.to_flat(),
            Head::Softmax(h) => h.to_flat(),
        }
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        Ok(match self {
            Head::Cosine(h) => Head::Cosine(h.with_flat(flat)?),
            Head::Softmax(h) => Head::Softmax(h.with_flat(flat)?),
        })
    }
}

impl Parameters for Model {
    fn shape_signature(&self) -> Vec<usize> {
        let mut sig = self.backbone.shape_signature();
        sig.push(usize::MAX);
        sig.extend(self.head.shape_signature());
        sig
    }

    fn num_params(&self) -> usize {
        self.backbone.num_params() + self.head.num_params()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.backbone.to_flat();
        flat.extend(self.head.to_flat());
        flat
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!("model has {} parameters, got {}", self.num_params(), flat.len())));
        }
        let (b, h) = flat.split_at(self.backbone.num_params());
        Ok(Self {
            backbone: self.backbone.with_flat(b)?,
            head: self.head.with_flat(h)?,
        })
    }
}
