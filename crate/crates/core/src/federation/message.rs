use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use crate::nn::{BackboneParams, Head};
use crate::{Error, Result};

/// Model weights as sent up to or down from the server.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub backbone: BackboneParams,
    pub head: Option<Head>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMean {
    pub mean: Array1<f64>,
    /// Samples behind a client's mean, or reporting clients after aggregation.
    pub count: usize,
}

/// Per-class mean feature vectors, keyed by class id.
///
/// Only classes with `count >= 1` are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeans {
    dim: usize,
    classes: BTreeMap<usize, ClassMean>,
}

impl ClassMeans {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            classes: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, class: usize, mean: Array1<f64>, count: usize) -> Result<()> {
        if mean.len() != self.dim {
            return Err(Error::Shape(format!("class {class}: mean dim {} != {}", mean.len(), self.dim)));
        }
        if count == 0 {
            return Err(Error::Parameter(format!("class {class}: count must be >= 1")));
        }
        self.classes.insert(class, ClassMean { mean, count });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, class: usize) -> Option<&ClassMean> {
        self.classes.get(&class)
    }

    /// Entries in ascending class order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &ClassMean)> {
        self.classes.iter().map(|(&c, m)| (c, m))
    }
}

/// Individual feature vectors with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    /// Shape `[n × d]`.
    pub vectors: Array2<f64>,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    pub fn new(vectors: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if vectors.nrows() != labels.len() {
            return Err(Error::Shape(format!("{} vectors but {} labels", vectors.nrows(), labels.len())));
        }
        Ok(Self { vectors, labels })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Everything that crosses the client/server boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundMessage {
    WeightSnapshot(WeightSnapshot),
    ClassMeanFeatures(ClassMeans),
    LabeledFeatureSet(LabeledFeatures),
}
