use std::collections::BTreeMap;

use ndarray::Array1;

use super::ClassMeans;
use crate::nn::{BackboneParams, Parameters};
use crate::{Error, Result};

/// Unweighted elementwise mean of congruent parameter sets, summed in the
/// order given.
pub fn average_weights<P: Parameters>(models: &[P]) -> Result<P> {
    let (first, rest) = models
        .split_first()
        .ok_or_else(|| Error::Aggregation("no models to average".to_string()))?;
    let signature = first.shape_signature();
    let mut sum = first.to_flat();
    for (i, m) in rest.iter().enumerate() {
        if m.shape_signature() != signature {
            return Err(Error::Aggregation(format!("model {} is not congruent with model 0", i + 1)));
        }
        for (s, v) in sum.iter_mut().zip(m.to_flat()) {
            *s += v;
        }
    }
    let n = models.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    first.with_flat(&sum)
}

/// Per-class mean over the clients that reported the class.
///
/// The output count of each class is the number of reporting clients;
/// classes nobody reported are absent.
pub fn aggregate_class_means(client_msgs: &[ClassMeans]) -> Result<ClassMeans> {
    let first = client_msgs
        .first()
        .ok_or_else(|| Error::Aggregation("no class-mean messages".to_string()))?;
    let dim = first.dim();
    let mut sums: BTreeMap<usize, (Array1<f64>, usize)> = BTreeMap::new();
    for (i, msg) in client_msgs.iter().enumerate() {
        if msg.dim() != dim {
            return Err(Error::Aggregation(format!(
                "message {i} has feature dim {}, expected {dim}",
                msg.dim()
            )));
        }
        for (class, entry) in msg.iter() {
            let slot = sums.entry(class).or_insert_with(|| (Array1::zeros(dim), 0));
            slot.0 += &entry.mean;
            slot.1 += 1;
        }
    }
    let mut out = ClassMeans::new(dim);
    for (class, (sum, reporters)) in sums {
        out.insert(class, sum / reporters as f64, reporters)?;
    }
    Ok(out)
}

/// `((n − 1)·M0 + M̃) / n`, elementwise.
///
/// Evaluated as `M0 + (M̃ − M0) / n`, which is the same quantity but returns
/// `M0` bit for bit when `M̃ == M0`; a single client gets `M̃` back as is.
pub fn regularize_backbone(m0: &BackboneParams, mtilde: &BackboneParams, n_clients: usize) -> Result<BackboneParams> {
    if n_clients == 0 {
        return Err(Error::config("n_clients", "must be >= 1"));
    }
    if m0.shape_signature() != mtilde.shape_signature() {
        return Err(Error::Aggregation(format!(
            "backbone shapes differ: {:?} vs {:?}",
            m0.shape_signature(),
            mtilde.shape_signature()
        )));
    }
    if n_clients == 1 {
        return Ok(mtilde.clone());
    }
    let n = n_clients as f64;
    let blended: Vec<f64> = m0
        .to_flat()
        .into_iter()
        .zip(mtilde.to_flat())
        .map(|(init, learned)| init + (learned - init) / n)
        .collect();
    m0.with_flat(&blended)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, HeadParams};
    use ndarray::array;

    #[test]
    fn averaging_identical_models_is_identity() {
        let m = init_params(1, &[3, 4, 2]).unwrap();
        assert_eq!(average_weights(&[m.clone(), m.clone(), m.clone()]).unwrap(), m);
    }

    #[test]
    fn scalar_average() {
        let a = HeadParams::new(array![[2.0]]).unwrap();
        let b = HeadParams::new(array![[4.0]]).unwrap();
        assert_eq!(average_weights(&[a, b]).unwrap().anchors()[[0, 0]], 3.0);
    }

    #[test]
    fn averaging_rejects_mismatched_shapes() {
        let a = init_params(1, &[3, 4, 2]).unwrap();
        let b = init_params(1, &[3, 5, 2]).unwrap();
        assert!(matches!(average_weights(&[a, b]), Err(Error::Aggregation(_))));
        assert!(matches!(average_weights::<BackboneParams>(&[]), Err(Error::Aggregation(_))));
    }

    #[test]
    fn single_client_means_pass_through() {
        let mut m = ClassMeans::new(2);
        m.insert(0, array![1.0, 2.0], 3).unwrap();
        m.insert(4, array![-1.0, 0.5], 1).unwrap();
        let agg = aggregate_class_means(std::slice::from_ref(&m)).unwrap();
        assert_eq!(agg.get(0).unwrap().mean, array![1.0, 2.0]);
        assert_eq!(agg.get(4).unwrap().mean, array![-1.0, 0.5]);
        assert_eq!(agg.get(0).unwrap().count, 1);
    }

    #[test]
    fn two_clients_average_unweighted() {
        let mut a = ClassMeans::new(2);
        a.insert(0, array![1.0, 0.0], 10).unwrap();
        let mut b = ClassMeans::new(2);
        b.insert(0, array![0.0, 1.0], 1).unwrap();
        let agg = aggregate_class_means(&[a, b]).unwrap();
        assert_eq!(agg.get(0).unwrap().mean, array![0.5, 0.5]);
        assert_eq!(agg.get(0).unwrap().count, 2);
    }

    #[test]
    fn dimension_mismatch() {
        let a = ClassMeans::new(2);
        let b = ClassMeans::new(3);
        assert!(matches!(aggregate_class_means(&[a, b]), Err(Error::Aggregation(_))));
    }

    #[test]
    fn regularization_cases() {
        let m0 = init_params(2, &[2, 3]).unwrap();
        let learned = init_params(3, &[2, 3]).unwrap();
        assert_eq!(regularize_backbone(&m0, &m0, 10).unwrap(), m0);
        assert_eq!(regularize_backbone(&m0, &learned, 1).unwrap(), learned);

        let zero = m0.with_flat(&vec![0.0; m0.num_params()]).unwrap();
        let ten = m0.with_flat(&vec![10.0; m0.num_params()]).unwrap();
        let r = regularize_backbone(&zero, &ten, 10).unwrap();
        assert!(r.to_flat().iter().all(|&v| v == 1.0));
    }
}
