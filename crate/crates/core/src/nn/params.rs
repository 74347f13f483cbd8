use crate::Result;

/// A set of trainable tensors that can be viewed as one flat vector.
///
/// The flat order is canonical (layer by layer, weights row-major before
/// biases) and is shared by the optimizer, the aggregation routines and the
/// wire encoding.
pub trait Parameters: Clone {
    /// Tensor shapes, used to check that two sets are congruent.
    fn shape_signature(&self) -> Vec<usize>;

    fn num_params(&self) -> usize;

    fn to_flat(&self) -> Vec<f64>;

    /// Returns a copy of `self` whose values are replaced by `flat`.
    fn with_flat(&self, flat: &[f64]) -> Result<Self>;
}
