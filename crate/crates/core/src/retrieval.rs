//! Exact kNN classification over exchanged feature banks.
//!
//! Neighbors are ordered by `(distance, bank index)`. The predicted label is
//! the most frequent label among the `k` nearest; ties go to the label with
//! the smallest summed neighbor distance, then to the smallest label.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// `1 − cos(q, b)`.
    #[default]
    Cosine,
    Euclidean,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::config("knn_metric", format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub label: usize,
    pub distance: f64,
}

/// Labeled vectors stored verbatim for exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    vectors: Array2<f64>,
    labels: Vec<usize>,
    norms: Vec<f64>,
    metric: Metric,
}

fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn knn_fit(vectors: Array2<f64>, labels: Vec<usize>, metric: Metric) -> Result<FeatureBank> {
    if vectors.nrows() == 0 {
        return Err(Error::config("feature bank", "cannot fit an empty bank"));
    }
    if vectors.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} vectors but {} labels", vectors.nrows(), labels.len())));
    }
    let norms: Vec<f64> = vectors.rows().into_iter().map(norm).collect();
    if metric == Metric::Cosine {
        if let Some(i) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::DegenerateInput(format!("bank vector {i} is zero under the cosine metric")));
        }
    }
    Ok(FeatureBank {
        vectors,
        labels,
        norms,
        metric,
    })
}

impl FeatureBank {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The `k` nearest bank entries, closest first.
    pub fn neighbors(&self, query: ArrayView1<'_, f64>, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 || k > self.len() {
            return Err(Error::Parameter(format!("k = {k} outside 1..={}", self.len())));
        }
        if query.len() != self.dim() {
            return Err(Error::Shape(format!("query dim {} != bank dim {}", query.len(), self.dim())));
        }
        let q_norm = norm(query);
        if self.metric == Metric::Cosine && q_norm == 0.0 {
            return Err(Error::DegenerateInput("zero query under the cosine metric".to_string()));
        }
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                let d = match self.metric {
                    Metric::Cosine => 1.0 - query.dot(&b) / (q_norm * self.norms[i]),
                    Metric::Euclidean => {
                        let diff = &query - &b;
                        diff.dot(&diff).sqrt()
                    }
                };
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        Ok(scored
            .into_iter()
            .map(|(distance, index)| Neighbor {
                index,
                label: self.labels[index],
                distance,
            })
            .collect())
    }

    pub fn predict(&self, query: ArrayView1<'_, f64>, k: usize) -> Result<usize> {
        Ok(vote(&self.neighbors(query, k)?))
    }
}

fn vote(neighbors: &[Neighbor]) -> usize {
    let mut tally: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for n in neighbors {
        let e = tally.entry(n.label).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += n.distance;
    }
    tally
        .into_iter()
        .min_by(|(la, (ca, sa)), (lb, (cb, sb))| {
            cb.cmp(ca)
                .then_with(|| sa.total_cmp(sb))
                .then_with(|| la.cmp(lb))
        })
        .map(|(label, _)| label)
        .expect("k >= 1")
}

/// Majority label among the `k` nearest neighbors of `query`.
pub fn knn_predict(bank: &FeatureBank, query: ArrayView1<'_, f64>, k: usize) -> Result<usize> {
    bank.predict(query, k)
}
