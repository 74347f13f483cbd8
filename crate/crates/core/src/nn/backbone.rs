use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::Parameters;
use crate::{seed, Error, Result};

/// One affine layer, `y = x Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `[out × in]`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// MLP backbone: ReLU after every hidden layer, linear final layer whose
/// output is the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    layers: Vec<Dense>,
}

impl BackboneParams {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("no layers".to_string()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() == 0 || layer.out_dim() == 0 {
                return Err(Error::InvalidArchitecture(format!("layer {i} has a zero dimension")));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {i}: bias length {} != output dim {}",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {i} expects {} inputs but previous layer emits {}",
                    layer.in_dim(),
                    layers[i - 1].out_dim()
                )));
            }
            if let Some(bad) = layer.weights.iter().chain(layer.bias.iter()).find(|x| !x.is_finite()) {
                return Err(Error::Numeric {
                    context: "backbone parameters",
                    value: *bad,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Embedding dimension `d`.
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer sizes including the input, e.g. `[d_in, 64, 32, d]`.
    pub fn arch(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::out_dim))
            .collect()
    }

    fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Dense {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: Array1::zeros(l.bias.len()),
            })
            .collect();
        Self { layers }
    }
}

impl Parameters for BackboneParams {
    fn shape_signature(&self) -> Vec<usize> {
        self.arch()
    }

    fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "backbone has {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.bias.len());
            rest = tail;
            layers.push(Dense {
                weights: Array2::from_shape_vec(l.weights.raw_dim(), w.to_vec())
                    .expect("length checked above"),
                bias: Array1::from(b.to_vec()),
            });
        }
        Ok(Self { layers })
    }
}

/// Builds a backbone for layer sizes `arch = [d_in, h_1, …, d]`.
///
/// Each weight is `limit · (2u − 1)` with `u` the next `f64` drawn from a
/// ChaCha8 stream seeded with `seed` (layers in order, weights row-major),
/// `limit = sqrt(6 / (fan_in + fan_out))`, rounded to `f32` precision.
/// Biases start at zero.
pub fn init_params(seed: u64, arch: &[usize]) -> Result<BackboneParams> {
    if arch.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least input and output sizes, got {arch:?}"
        )));
    }
    if arch.contains(&0) {
        return Err(Error::InvalidArchitecture(format!("zero-size layer in {arch:?}")));
    }
    let mut rng = seed::rng(seed);
    let layers = arch
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                let u: f64 = rng.random();
                (limit * (2.0 * u - 1.0)) as f32 as f64
            });
            Dense {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    BackboneParams::from_layers(layers)
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `inputs[l]` is the input of layer `l`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer; the last one is the embedding.
    pre: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn embeddings(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }

    /// Smallest |pre-activation| over hidden units, i.e. the distance to the
    /// nearest ReLU kink.
    pub fn min_hidden_margin(&self) -> f64 {
        self.pre[..self.pre.len() - 1]
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }
}

pub fn forward_trace(params: &BackboneParams, inputs: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
    if inputs.ncols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} features, backbone expects {}",
            inputs.ncols(),
            params.input_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut trace_inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut x = inputs.to_owned();
    for (i, layer) in params.layers.iter().enumerate() {
        let z = x.dot(&layer.weights.t()) + &layer.bias;
        let next = if i + 1 < n_layers { z.mapv(|v| v.max(0.0)) } else { z.clone() };
        trace_inputs.push(x);
        pre.push(z);
        x = next;
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: "forward output",
            value: *bad,
        });
    }
    Ok(ForwardTrace {
        inputs: trace_inputs,
        pre,
    })
}

/// Embeddings `[N × d]` for a batch of inputs `[N × d_in]`.
pub fn forward(params: &BackboneParams, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut trace = forward_trace(params, inputs)?;
    Ok(trace.pre.pop().expect("at least one layer"))
}

/// Backpropagates `d_embeddings` (dL/d output) through the traced pass.
pub fn backward(params: &BackboneParams, trace: &ForwardTrace, d_embeddings: Array2<f64>) -> Result<BackboneParams> {
    if d_embeddings.raw_dim() != trace.embeddings().raw_dim() {
        return Err(Error::Shape(format!(
            "embedding gradient shape {:?} != embedding shape {:?}",
            d_embeddings.shape(),
            trace.embeddings().shape()
        )));
    }
    let mut grads = params.zeros_like();
    let n_layers = params.layers.len();
    let mut delta = d_embeddings;
    for i in (0..n_layers).rev() {
        if i + 1 < n_layers {
            delta.zip_mut_with(&trace.pre[i], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        grads.layers[i].weights = delta.t().dot(&trace.inputs[i]);
        grads.layers[i].bias = delta.sum_axis(Axis(0));
        if i > 0 {
            delta = delta.dot(&params.layers[i].weights);
        }
    }
    Ok(grads)
}

/// Loss value and backbone gradients for `loss_fn` evaluated on the
/// embeddings of `inputs`. `loss_fn` returns the loss and dL/d embeddings.
pub fn grad<F>(params: &BackboneParams, inputs: ArrayView2<'_, f64>, loss_fn: F) -> Result<(f64, BackboneParams)>
where
    F: FnOnce(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
{
    let trace = forward_trace(params, inputs)?;
    let (loss, d_emb) = loss_fn(trace.embeddings())?;
    if !loss.is_finite() {
        return Err(Error::Numeric { context: "loss", value: loss });
    }
    let grads = backward(params, &trace, d_emb)?;
    if let Some(bad) = grads.to_flat().into_iter().find(|g| !g.is_finite()) {
        return Err(Error::Numeric {
            context: "backbone gradient",
            value: bad,
        });
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn single_layer(w: Array2<f64>, b: Array1<f64>) -> BackboneParams {
        BackboneParams::from_layers(vec![Dense { weights: w, bias: b }]).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let arch = [4, 8, 16];
        assert_eq!(init_params(7, &arch).unwrap(), init_params(7, &arch).unwrap());
        assert_ne!(init_params(7, &arch).unwrap(), init_params(8, &arch).unwrap());
    }

    #[test]
    fn init_matches_reference_formula() {
        // independent re-derivation of the documented scheme
        let arch = [4usize, 8, 16];
        let params = init_params(7, &arch).unwrap();
        let mut rng = crate::seed::rng(7);
        for (layer, pair) in params.layers().iter().zip(arch.windows(2)) {
            let limit = (6.0f64 / (pair[0] + pair[1]) as f64).sqrt();
            assert_eq!(layer.weights.shape(), &[pair[1], pair[0]]);
            for r in 0..pair[1] {
                for c in 0..pair[0] {
                    let u: f64 = rng.random();
                    let expected = ((2.0 * u - 1.0) * limit) as f32 as f64;
                    assert_eq!(layer.weights[[r, c]], expected);
                    assert!(expected.abs() <= limit);
                }
            }
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_rejects_bad_arch() {
        assert!(matches!(init_params(0, &[4, 0, 3]), Err(Error::InvalidArchitecture(_))));
        assert!(matches!(init_params(0, &[4]), Err(Error::InvalidArchitecture(_))));
        assert!(matches!(init_params(0, &[]), Err(Error::InvalidArchitecture(_))));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let p = single_layer(Array2::eye(3), Array1::zeros(3));
        let x = array![[1.5, -2.0, 0.25]];
        assert_eq!(forward(&p, x.view()).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        let p = init_params(1, &[3, 5, 2]).unwrap();
        let zero = p.with_flat(&vec![0.0; p.num_params()]).unwrap();
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]];
        assert!(forward(&zero, x.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_scalar_matmul_oracle() {
        let p = init_params(11, &[4, 6, 5, 3]).unwrap();
        let p = {
            let mut rng = crate::seed::rng(5);
            let flat: Vec<f64> = p.to_flat().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            p.with_flat(&flat).unwrap()
        };
        let mut rng = crate::seed::rng(99);
        let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-2.0..2.0));

        let out = forward(&p, x.view()).unwrap();

        let n_layers = p.layers().len();
        for s in 0..3 {
            let mut act: Vec<f64> = x.row(s).to_vec();
            for (li, layer) in p.layers().iter().enumerate() {
                let mut next = vec![0.0; layer.out_dim()];
                for (o, slot) in next.iter_mut().enumerate() {
                    let mut acc = layer.bias[o];
                    for (i, a) in act.iter().enumerate() {
                        acc += layer.weights[[o, i]] * a;
                    }
                    *slot = if li + 1 < n_layers { acc.max(0.0) } else { acc };
                }
                act = next;
            }
            for (j, v) in act.iter().enumerate() {
                assert!((out[[s, j]] - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = init_params(1, &[3, 2]).unwrap();
        let x = Array2::<f64>::zeros((2, 4));
        assert!(matches!(forward(&p, x.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn forward_is_bitwise_pure() {
        let p = init_params(3, &[5, 7, 4]).unwrap();
        let mut rng = crate::seed::rng(2);
        let x = Array2::from_shape_simple_fn((6, 5), || rng.random_range(-1.0..1.0));
        assert_eq!(forward(&p, x.view()).unwrap(), forward(&p, x.view()).unwrap());
    }

    #[test]
    fn quadratic_scalar_gradient() {
        // loss = w², realized as a 1×1 layer fed with x = 1
        let p = single_layer(array![[3.0]], array![0.0]);
        let (loss, g) = grad(&p, array![[1.0]].view(), |e| Ok((e[[0, 0]].powi(2), e.mapv(|v| 2.0 * v)))).unwrap();
        assert_eq!(loss, 9.0);
        assert_eq!(g.layers()[0].weights[[0, 0]], 6.0);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p = init_params(4, &[3, 4, 2]).unwrap();
        let x = array![[0.3, -0.2, 0.9]];
        let (_, g) = grad(&p, x.view(), |e| Ok((1.5, Array2::zeros(e.raw_dim())))).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let p = init_params(4, &[3, 2]).unwrap();
        let x = array![[0.3, -0.2, 0.9]];
        let err = grad(&p, x.view(), |e| Ok((f64::NAN, Array2::zeros(e.raw_dim())))).unwrap_err();
        match err {
            Error::Numeric { value, .. } => assert!(value.is_nan()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // sum of squared embeddings weighted by a fixed target
        let mut rng = crate::seed::rng(17);
        let mut checked = 0;
        while checked < 20 {
            let p = init_params(rng.random(), &[3, 5, 4]).unwrap();
            let x = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.0..1.0));
            let target = Array2::from_shape_simple_fn((4, 4), || rng.random_range(-1.0..1.0));
            if forward_trace(&p, x.view()).unwrap().min_hidden_margin() < 1e-3 {
                continue;
            }
            let loss_of = |e: &Array2<f64>| (e - &target).mapv(|v| v * v).sum();
            let (_, g) = grad(&p, x.view(), |e| Ok((loss_of(e), (e - &target) * 2.0))).unwrap();
            let flat = p.to_flat();
            let analytic = g.to_flat();
            let h = 1e-4;
            for i in 0..flat.len() {
                let mut plus = flat.clone();
                plus[i] += h;
                let mut minus = flat.clone();
                minus[i] -= h;
                let lp = loss_of(&forward(&p.with_flat(&plus).unwrap(), x.view()).unwrap());
                let lm = loss_of(&forward(&p.with_flat(&minus).unwrap(), x.view()).unwrap());
                let numeric = (lp - lm) / (2.0 * h);
                let denom = analytic[i].abs().max(numeric.abs()).max(1e-3);
                assert!((analytic[i] - numeric).abs() / denom < 1e-4, "param {i}: {} vs {numeric}", analytic[i]);
            }
            checked += 1;
        }
    }
}
