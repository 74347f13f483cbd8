//! Dense backbone, classification heads and the Adam optimizer.
//!
//! All arithmetic is `f64`. Freshly initialized weights are rounded to `f32`
//! precision so that a model survives the float32 wire encoding unchanged.

mod adam;
mod backbone;
mod head;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backbone::{backward, forward, forward_trace, grad, init_params, BackboneParams, Dense, ForwardTrace};
pub use head::{Head, HeadParams, LinearHead, Model};
pub use params::Parameters;

use ndarray::{Array1, ArrayView1};

use crate::{Error, Result};

/// Scales `v` to unit Euclidean length.
///
/// A zero (or non-finite) vector is rejected rather than patched with an
/// epsilon: it means the model producing it is broken.
pub fn l2_normalize(v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let norm = v.dot(&v).sqrt();
    if !norm.is_finite() {
        return Err(Error::Numeric {
            context: "l2 norm",
            value: norm,
        });
    }
    if norm == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot normalize a zero vector".to_string(),
        ));
    }
    Ok(v.mapv(|x| x / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn normalizes_three_four() {
        let u = l2_normalize(array![3.0, 4.0].view()).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-15);
        assert!((u[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn unit_vector_is_fixed() {
        let e = array![0.0, 1.0, 0.0];
        assert_eq!(l2_normalize(e.view()).unwrap(), e);
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let err = l2_normalize(array![0.0, 0.0].view()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..12)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn rescales_back_to_input(v in nonzero_vec()) {
            let v = Array1::from(v);
            let u = l2_normalize(v.view()).unwrap();
            let norm = v.dot(&v).sqrt();
            prop_assert!((u.dot(&u).sqrt() - 1.0).abs() < 1e-9);
            for (a, b) in u.iter().zip(v.iter()) {
                prop_assert!((a * norm - b).abs() < 1e-9);
            }
        }

        #[test]
        fn idempotent_and_scale_invariant(v in nonzero_vec(), c in 1e-3f64..1e3) {
            let v = Array1::from(v);
            let u = l2_normalize(v.view()).unwrap();
            let uu = l2_normalize(u.view()).unwrap();
            let cu = l2_normalize(v.mapv(|x| x * c).view()).unwrap();
            for i in 0..v.len() {
                prop_assert!((u[i] - uu[i]).abs() < 1e-9);
                prop_assert!((u[i] - cu[i]).abs() < 1e-9);
            }
        }
    }
}
