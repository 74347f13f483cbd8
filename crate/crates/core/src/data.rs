//! Datasets, stratified splitting, Dirichlet label-skew partitioning and CSV
//! ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Gamma, StandardNormal};

use crate::seed::{self, Stream};
use crate::{Error, Result};

/// Feature matrix with dense integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    /// Every class in `0..n_classes` must occur at least once.
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", inputs.nrows(), labels.len())));
        }
        if labels.is_empty() || n_classes == 0 {
            return Err(Error::Parameter("dataset must contain at least one sample".to_string()));
        }
        let mut seen = vec![false; n_classes];
        for &label in &labels {
            *seen.get_mut(label).ok_or(Error::Label { label, n_classes })? = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Parameter(format!("class {c} has no samples")));
        }
        Ok(Self { inputs, labels, n_classes })
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Sample indices grouped by class, each list ascending.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }

    /// Input rows at `indices`, in the given order.
    pub fn rows(&self, indices: &[usize]) -> Array2<f64> {
        self.inputs.select(Axis(0), indices)
    }

    fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
        )
    }
}

/// Gaussian-cluster dataset parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub d_in: usize,
    /// Standard deviation of the isotropic noise around each center.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            per_class: 100,
            d_in: 8,
            spread: 0.25,
            seed: 0,
        }
    }
}

/// One Gaussian cluster per class. Centers are Gaussian draws rescaled so the
/// closest pair of centers is exactly one unit apart; samples are grouped by
/// class in ascending label order.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_classes == 0 || cfg.per_class == 0 || cfg.d_in == 0 {
        return Err(Error::Parameter("n_classes, per_class and d_in must be > 0".to_string()));
    }
    if !(cfg.spread >= 0.0 && cfg.spread.is_finite()) {
        return Err(Error::config("spread", format!("must be finite and >= 0, got {}", cfg.spread)));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut centers = Array2::from_shape_simple_fn((cfg.n_classes, cfg.d_in), || rng.sample::<f64, _>(StandardNormal));
    let min_dist = (0..cfg.n_classes)
        .flat_map(|a| (a + 1..cfg.n_classes).map(move |b| (a, b)))
        .map(|(a, b)| {
            let diff = &centers.row(a) - &centers.row(b);
            diff.dot(&diff).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    let scale = if min_dist.is_finite() {
        min_dist
    } else {
        let c = centers.row(0);
        c.dot(&c).sqrt()
    };
    if scale == 0.0 {
        return Err(Error::DegenerateInput("coincident class centers".to_string()));
    }
    centers.mapv_inplace(|v| v / scale);

    let n = cfg.n_classes * cfg.per_class;
    let mut inputs = Array2::zeros((n, cfg.d_in));
    let mut labels = Vec::with_capacity(n);
    for class in 0..cfg.n_classes {
        for k in 0..cfg.per_class {
            let row = class * cfg.per_class + k;
            for j in 0..cfg.d_in {
                let noise: f64 = rng.sample(StandardNormal);
                inputs[[row, j]] = centers[[class, j]] + cfg.spread * noise;
            }
            labels.push(class);
        }
    }
    Dataset::new(inputs, labels, cfg.n_classes)
}

/// Stratified train/validation index split.
///
/// Each class contributes `round(count · test_fraction)` validation samples,
/// clamped to `[1, count − 1]` so both sides see every class. Both index
/// lists are returned ascending.
pub fn split_indices(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config("test_fraction", format!("must lie in (0, 1), got {test_fraction}")));
    }
    let mut rng = seed::derived_rng(seed, Stream::Split, 0, 0);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class, mut idx) in dataset.indices_by_class().into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {} sample(s); at least 2 are needed",
                idx.len()
            )));
        }
        let n_val = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        idx.shuffle(&mut rng);
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Stratified split into `(train, validation)` datasets.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_indices(dataset, test_fraction, seed)?;
    Ok((dataset.subset(&train)?, dataset.subset(&val)?))
}

/// Disjoint per-client index lists covering a training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub shards: Vec<Vec<usize>>,
}

impl Partition {
    pub fn n_clients(&self) -> usize {
        self.shards.len()
    }

    /// `counts[client][class]`.
    pub fn class_counts(&self, dataset: &Dataset) -> Vec<Vec<usize>> {
        self.shards
            .iter()
            .map(|shard| {
                let mut counts = vec![0; dataset.n_classes()];
                for &i in shard {
                    counts[dataset.labels()[i]] += 1;
                }
                counts
            })
            .collect()
    }
}

fn dirichlet(rng: &mut impl Rng, alpha: f64, n: usize) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config("alpha", e.to_string()))?;
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        Ok(draws.into_iter().map(|g| g / total).collect())
    } else {
        // every gamma draw underflowed; fall back to the uniform point
        Ok(vec![1.0 / n as f64; n])
    }
}

/// Label-skewed client shards.
///
/// For every class (ascending) a proportion vector `p ~ Dirichlet(α·1)` over
/// clients is drawn, then each of the class's samples (ascending index) is
/// sent to a client drawn from `p`. Shards may be empty.
pub fn dirichlet_partition(train: &Dataset, n_clients: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::config("n_clients", "must be >= 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config("alpha", format!("must be > 0, got {alpha}")));
    }
    let mut rng = seed::derived_rng(seed, Stream::Partition, 0, 0);
    let mut shards = vec![Vec::new(); n_clients];
    for idx in train.indices_by_class() {
        let p = dirichlet(&mut rng, alpha, n_clients)?;
        let pick = WeightedIndex::new(&p).map_err(|e| Error::Parameter(format!("client proportions: {e}")))?;
        for i in idx {
            shards[pick.sample(&mut rng)].push(i);
        }
    }
    for shard in &mut shards {
        shard.sort_unstable();
    }
    Ok(Partition { shards })
}

/// Reads `f0,…,f{k-1},label` rows. Labels may be any integers; they are
/// re-indexed densely from 0 in ascending order.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(&e))?.clone();
    if header.len() < 2 || header.get(header.len() - 1) != Some("label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be f0,…,f{k-1},label".to_string(),
        });
    }
    let k = header.len() - 1;
    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for field in record.iter().take(k) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric feature `{field}`"),
            })?;
            features.push(v);
        }
        let label = &record[k];
        raw_labels.push(label.parse().map_err(|_| Error::Parse {
            line,
            message: format!("non-integer label `{label}`"),
        })?);
    }
    if raw_labels.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".to_string(),
        });
    }
    let dense: BTreeMap<i64, usize> = {
        let mut distinct = raw_labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let labels = raw_labels.iter().map(|l| dense[l]).collect();
    let inputs = Array2::from_shape_vec((raw_labels.len(), k), features).expect("row width checked by csv reader");
    Dataset::new(inputs, labels, dense.len())
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Writes `dataset` in the format read by [`load_csv`].
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).chain(["label".to_string()]).collect();
    let io = |e: csv::Error| Error::io(path, e.into());
    writer.write_record(&header).map_err(io)?;
    for (row, label) in dataset.inputs.rows().into_iter().zip(&dataset.labels) {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).chain([label.to_string()]).collect();
        writer.write_record(&fields).map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-class mean of the input rows (classes without samples give zeros).
pub fn class_centroids(dataset: &Dataset) -> Array2<f64> {
    let mut sums = Array2::zeros((dataset.n_classes, dataset.dim()));
    let counts = dataset.class_counts();
    for (row, &l) in dataset.inputs.rows().into_iter().zip(&dataset.labels) {
        let mut s = sums.row_mut(l);
        s += &row;
    }
    for (mut s, &c) in sums.rows_mut().into_iter().zip(&counts) {
        if c > 0 {
            s.mapv_inplace(|v| v / c as f64);
        }
    }
    sums
}

/// Shannon entropy (nats) of a count vector.
pub fn count_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn synth(n_classes: usize, per_class: usize, spread: f64, seed: u64) -> Dataset {
        synth_generate(&SynthConfig {
            n_classes,
            per_class,
            d_in: 4,
            spread,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn zero_spread_puts_samples_on_centers() {
        let ds = synth(3, 5, 0.0, 1);
        let x = ds.inputs();
        for (i, &l) in ds.labels().iter().enumerate() {
            assert_eq!(x.row(i), x.row(l * 5));
        }
    }

    #[test]
    fn synth_counts_and_determinism() {
        let ds = synth(3, 10, 0.3, 2);
        assert_eq!(ds.len(), 30);
        assert_eq!(ds.class_counts(), vec![10, 10, 10]);
        assert_eq!(ds, synth(3, 10, 0.3, 2));
        assert_ne!(ds, synth(3, 10, 0.3, 3));
    }

    #[test]
    fn synth_centers_are_unit_separated() {
        let ds = synth(6, 1, 0.0, 9);
        let c = class_centroids(&ds);
        let mut min = f64::INFINITY;
        for a in 0..6 {
            for b in a + 1..6 {
                let d = &c.row(a) - &c.row(b);
                min = min.min(d.dot(&d).sqrt());
            }
        }
        assert!((min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_at_small_spread() {
        // multiclass perceptron on [x, 1] must reach zero training errors
        let ds = synth_generate(&SynthConfig {
            n_classes: 5,
            per_class: 40,
            d_in: 6,
            spread: 0.1,
            seed: 12,
        })
        .unwrap();
        let d = ds.dim() + 1;
        let mut w = Array2::<f64>::zeros((ds.n_classes(), d));
        let augmented = |i: usize| {
            let mut v = ds.inputs().row(i).to_vec();
            v.push(1.0);
            Array1::from(v)
        };
        let mut errors = usize::MAX;
        for _ in 0..1000 {
            errors = 0;
            for i in 0..ds.len() {
                let x = augmented(i);
                let scores = w.dot(&x);
                let pred = (0..ds.n_classes()).fold(0, |b, j| if scores[j] > scores[b] { j } else { b });
                let y = ds.labels()[i];
                if pred != y {
                    errors += 1;
                    let mut wy = w.row_mut(y);
                    wy += &x;
                    let mut wp = w.row_mut(pred);
                    wp -= &x;
                }
            }
            if errors == 0 {
                break;
            }
        }
        assert_eq!(errors, 0);
    }

    #[test]
    fn split_hundred_per_class() {
        let ds = synth(4, 100, 0.2, 3);
        let (train, val) = split(&ds, 0.3, 7).unwrap();
        assert_eq!(train.class_counts(), vec![70; 4]);
        assert_eq!(val.class_counts(), vec![30; 4]);
    }

    #[test]
    fn split_two_sample_class() {
        let ds = synth(2, 2, 0.2, 3);
        let (train, val) = split(&ds, 0.5, 7).unwrap();
        assert_eq!(train.class_counts(), vec![1, 1]);
        assert_eq!(val.class_counts(), vec![1, 1]);
    }

    #[test]
    fn split_is_a_partition() {
        let ds = synth(3, 17, 0.2, 4);
        let (mut train, val) = split_indices(&ds, 0.3, 11).unwrap();
        train.extend(val);
        train.sort_unstable();
        assert_eq!(train, (0..ds.len()).collect::<Vec<_>>());
        assert_eq!(split_indices(&ds, 0.3, 11).unwrap(), split_indices(&ds, 0.3, 11).unwrap());
    }

    #[test]
    fn split_rejects_singleton_class() {
        let inputs = Array2::zeros((3, 2));
        let ds = Dataset::new(inputs, vec![0, 0, 1], 2).unwrap();
        assert!(matches!(split(&ds, 0.3, 0), Err(Error::Stratification(_))));
        assert!(matches!(split(&ds, 1.0, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn single_client_gets_everything() {
        let ds = synth(3, 9, 0.2, 5);
        let p = dirichlet_partition(&ds, 1, 0.5, 3).unwrap();
        assert_eq!(p.shards, vec![(0..27).collect::<Vec<_>>()]);
    }

    #[test]
    fn large_alpha_is_near_uniform() {
        // per-cell counts are Binomial(n, 1/n_clients) in the α → ∞ limit
        let ds = synth(3, 200, 0.2, 5);
        let n_clients = 5;
        let p = 1.0 / n_clients as f64;
        let sigma = (200.0 * p * (1.0 - p)).sqrt();
        let (mut cells, mut inside) = (0, 0);
        for s in 0..20 {
            let part = dirichlet_partition(&ds, n_clients, 1e6, s).unwrap();
            for counts in part.class_counts(&ds) {
                for c in counts {
                    cells += 1;
                    let z = (c as f64 - 200.0 * p).abs() / sigma;
                    assert!(z < 4.5, "count {c} is {z:.1}σ from uniform");
                    if z <= 3.0 {
                        inside += 1;
                    }
                }
            }
        }
        assert!(inside as f64 / cells as f64 >= 0.99, "{inside}/{cells} within 3σ");
    }

    #[test]
    fn small_alpha_is_more_skewed() {
        let ds = synth(10, 50, 0.2, 6);
        let median_entropy = |alpha: f64| {
            let mut hs: Vec<f64> = (0..20)
                .flat_map(|s| {
                    dirichlet_partition(&ds, 10, alpha, s)
                        .unwrap()
                        .class_counts(&ds)
                        .iter()
                        .map(|c| count_entropy(c))
                        .collect::<Vec<_>>()
                })
                .collect();
            hs.sort_by(f64::total_cmp);
            hs[hs.len() / 2]
        };
        assert!(median_entropy(0.1) < median_entropy(1e6));
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let ds = synth(4, 25, 0.2, 8);
        let part = dirichlet_partition(&ds, 7, 0.3, 2).unwrap();
        let mut all: Vec<usize> = part.shards.concat();
        all.sort_unstable();
        assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        assert_eq!(part, dirichlet_partition(&ds, 7, 0.3, 2).unwrap());
    }

    #[test]
    fn csv_round_trip_and_densification() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "f0,f1,label\n1.5,2,9\n-3,0.25,5\n").unwrap();
        let ds = load_csv(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.inputs()[[0, 0]], 1.5);

        let synth_ds = synth(3, 4, 0.7, 1);
        write_csv(&synth_ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.labels(), synth_ds.labels());
        for (a, b) in back.inputs().iter().zip(synth_ds.inputs().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "f0,f1,label\n1,2,0\n1,x,1\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&path, "f0,f1,label\n1,2,0\n1,2\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_csv(dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
