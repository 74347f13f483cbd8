//! Softmax cross-entropy, cosine logits, the normalized softmax loss and the
//! additive-angular-margin (ArcFace) loss, with analytic gradients.
//!
//! Cosine heads carry no bias. `cos(θ + m)` is evaluated as
//! `cos θ · cos m − sin θ · sin m` with `sin θ = sqrt(max(0, 1 − cos² θ))`,
//! so no `acos` is ever taken.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::nn::LinearHead;
use crate::{Error, Result};

/// Additive angular margin `m` and logit scale `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginConfig {
    margin: f64,
    scale: f64,
}

impl MarginConfig {
    pub fn new(margin: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config("scale", format!("must be > 0, got {scale}")));
        }
        if !(0.0..FRAC_PI_2).contains(&margin) {
            return Err(Error::config("margin", format!("must lie in [0, π/2), got {margin}")));
        }
        Ok(Self { margin, scale })
    }

    /// No margin, unit scale: the plain normalized softmax loss.
    pub fn unscaled() -> Self {
        Self { margin: 0.0, scale: 1.0 }
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self { margin: 0.2, scale: 20.0 }
    }
}

/// Loss value with gradients w.r.t. the embeddings and the head.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub d_embeddings: Array2<f64>,
    /// Gradient w.r.t. the head weights (anchors or softmax weights).
    pub d_head: Array2<f64>,
    /// Softmax bias gradient; `None` for cosine heads.
    pub d_bias: Option<Array1<f64>>,
}

fn check_labels(n_rows: usize, n_classes: usize, labels: &[usize]) -> Result<()> {
    if n_rows == 0 {
        return Err(Error::Parameter("empty batch".to_string()));
    }
    if labels.len() != n_rows {
        return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), n_rows)));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Label { label, n_classes });
    }
    Ok(())
}

/// Row-wise log-softmax with max subtraction.
fn log_softmax(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`).
pub fn softmax_ce(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_labels(logits.nrows(), logits.ncols(), labels)?;
    let logp = log_softmax(logits);
    let total: f64 = labels.iter().enumerate().map(|(i, &y)| -logp[[i, y]]).sum();
    let loss = total / labels.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric { context: "softmax cross-entropy", value: loss });
    }
    Ok(loss)
}

/// Loss and dL/d logits.
pub fn softmax_ce_grad(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let loss = softmax_ce(logits, labels)?;
    let n = labels.len() as f64;
    let mut grad = log_softmax(logits).mapv(f64::exp);
    for (i, &y) in labels.iter().enumerate() {
        grad[[i, y]] -= 1.0;
    }
    grad.mapv_inplace(|g| g / n);
    Ok((loss, grad))
}

/// Row-normalized copy plus the original row norms.
fn normalize_rows(m: ArrayView2<'_, f64>, what: &str) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms = m.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateInput(format!("{what} row {i} is zero")));
    }
    if let Some(bad) = norms.iter().find(|n| !n.is_finite()) {
        return Err(Error::Numeric { context: "row norm", value: *bad });
    }
    let unit = &m / &norms.view().insert_axis(Axis(1));
    Ok((unit, norms))
}

fn check_dims(embeddings: ArrayView2<'_, f64>, anchors: ArrayView2<'_, f64>) -> Result<()> {
    if embeddings.ncols() != anchors.ncols() {
        return Err(Error::Shape(format!(
            "embedding dim {} != anchor dim {}",
            embeddings.ncols(),
            anchors.ncols()
        )));
    }
    Ok(())
}

/// `cos θ_ij` between embedding `i` and anchor `j`, both L2-normalized.
pub fn cosine_logits(embeddings: ArrayView2<'_, f64>, anchors: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dims(embeddings, anchors)?;
    let (x, _) = normalize_rows(embeddings, "embedding")?;
    let (w, _) = normalize_rows(anchors, "anchor")?;
    Ok(x.dot(&w.t()).mapv(|c| c.clamp(-1.0, 1.0)))
}

fn sin_from_cos(c: f64) -> f64 {
    (1.0 - c * c).max(0.0).sqrt()
}

/// Scaled logits with the angular margin added on each row's true class.
fn margin_logits(cos: &Array2<f64>, labels: &[usize], cfg: MarginConfig) -> Array2<f64> {
    let (cm, sm) = (cfg.margin.cos(), cfg.margin.sin());
    let mut logits = cos.mapv(|c| cfg.scale * c);
    for (i, &y) in labels.iter().enumerate() {
        let c = cos[[i, y]];
        logits[[i, y]] = cfg.scale * (c * cm - sin_from_cos(c) * sm);
    }
    logits
}

/// Normalized softmax loss: cross-entropy over raw cosine logits.
pub fn nsl_loss(embeddings: ArrayView2<'_, f64>, anchors: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let cos = cosine_logits(embeddings, anchors)?;
    check_labels(cos.nrows(), cos.ncols(), labels)?;
    softmax_ce(cos.view(), labels)
}

/// ArcFace: true-class logit `s·cos(θ + m)`, the others `s·cos θ`.
pub fn arcface_loss(
    embeddings: ArrayView2<'_, f64>,
    anchors: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: MarginConfig,
) -> Result<f64> {
    let cos = cosine_logits(embeddings, anchors)?;
    check_labels(cos.nrows(), cos.ncols(), labels)?;
    softmax_ce(margin_logits(&cos, labels, cfg).view(), labels)
}

/// Pulls a gradient w.r.t. unit rows back through `row / ‖row‖`.
fn through_normalization(d_unit: Array2<f64>, unit: &Array2<f64>, norms: &Array1<f64>) -> Array2<f64> {
    let mut out = d_unit;
    Zip::from(out.rows_mut())
        .and(unit.rows())
        .and(norms)
        .for_each(|mut g, u, &n| {
            let radial = u.dot(&g);
            Zip::from(&mut g).and(u).for_each(|gi, &ui| *gi = (*gi - ui * radial) / n);
        });
    out
}

/// ArcFace loss with gradients w.r.t. embeddings and anchors.
pub fn arcface_loss_grad(
    embeddings: ArrayView2<'_, f64>,
    anchors: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: MarginConfig,
) -> Result<LossGrad> {
    check_dims(embeddings, anchors)?;
    check_labels(embeddings.nrows(), anchors.nrows(), labels)?;
    let (x, x_norms) = normalize_rows(embeddings, "embedding")?;
    let (w, w_norms) = normalize_rows(anchors, "anchor")?;
    let cos = x.dot(&w.t()).mapv(|c| c.clamp(-1.0, 1.0));
    let logits = margin_logits(&cos, labels, cfg);
    let (loss, d_logits) = softmax_ce_grad(logits.view(), labels)?;

    let (cm, sm) = (cfg.margin.cos(), cfg.margin.sin());
    let mut d_cos = d_logits.mapv(|g| g * cfg.scale);
    for (i, &y) in labels.iter().enumerate() {
        let c = cos[[i, y]];
        let s = sin_from_cos(c);
        let slope = if s > 0.0 { cm + c * sm / s } else { cm };
        d_cos[[i, y]] *= slope;
    }
    let d_x = d_cos.dot(&w);
    let d_w = d_cos.t().dot(&x);
    Ok(LossGrad {
        loss,
        d_embeddings: through_normalization(d_x, &x, &x_norms),
        d_head: through_normalization(d_w, &w, &w_norms),
        d_bias: None,
    })
}

/// Normalized softmax loss with gradients.
pub fn nsl_loss_grad(embeddings: ArrayView2<'_, f64>, anchors: ArrayView2<'_, f64>, labels: &[usize]) -> Result<LossGrad> {
    arcface_loss_grad(embeddings, anchors, labels, MarginConfig::unscaled())
}

/// Cross-entropy of a biased linear softmax head, with gradients.
pub fn linear_softmax_loss_grad(embeddings: ArrayView2<'_, f64>, head: &LinearHead, labels: &[usize]) -> Result<LossGrad> {
    let logits = head.logits(embeddings)?;
    let (loss, d_logits) = softmax_ce_grad(logits.view(), labels)?;
    Ok(LossGrad {
        loss,
        d_embeddings: d_logits.dot(&head.weights),
        d_head: d_logits.t().dot(&embeddings),
        d_bias: Some(d_logits.sum_axis(Axis(0))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn uniform_logits_give_ln_n() {
        let logits = Array2::from_elem((3, 5), 0.7);
        let loss = softmax_ce(logits.view(), &[0, 2, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logit_gives_zero_loss() {
        let logits = array![[1000.0, 0.0, 0.0]];
        let loss = softmax_ce(logits.view(), &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(loss >= 0.0);
    }

    #[test]
    fn softmax_ce_matches_scalar_loop() {
        let mut rng = crate::seed::rng(3);
        let logits = random_matrix(&mut rng, 3, 4).mapv(|v| v * 5.0);
        let labels = [1, 3, 0];
        let mut expected = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let denom: f64 = (0..4).map(|j| logits[[i, j]].exp()).sum();
            expected -= (logits[[i, y]].exp() / denom).ln();
        }
        expected /= 3.0;
        assert!((softmax_ce(logits.view(), &labels).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn out_of_range_label() {
        let logits = Array2::zeros((1, 3));
        assert!(matches!(softmax_ce(logits.view(), &[3]), Err(Error::Label { label: 3, n_classes: 3 })));
    }

    #[test]
    fn cosine_of_matching_and_orthogonal() {
        let anchors = array![[2.0, 0.0], [0.0, 3.0]];
        let emb = array![[5.0, 0.0]];
        let cos = cosine_logits(emb.view(), anchors.view()).unwrap();
        assert_eq!(cos, array![[1.0, 0.0]]);
    }

    #[test]
    fn cosine_matches_naive_oracle() {
        let mut rng = crate::seed::rng(4);
        let emb = random_matrix(&mut rng, 6, 5);
        let anchors = random_matrix(&mut rng, 4, 5);
        let cos = cosine_logits(emb.view(), anchors.view()).unwrap();
        for i in 0..6 {
            for j in 0..4 {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for k in 0..5 {
                    dot += emb[[i, k]] * anchors[[j, k]];
                    na += emb[[i, k]] * emb[[i, k]];
                    nb += anchors[[j, k]] * anchors[[j, k]];
                }
                assert!((cos[[i, j]] - dot / (na.sqrt() * nb.sqrt())).abs() < 1e-9);
                assert!((-1.0..=1.0).contains(&cos[[i, j]]));
            }
        }
    }

    #[test]
    fn zero_rows_are_degenerate() {
        let anchors = array![[1.0, 0.0], [0.0, 0.0]];
        let emb = array![[1.0, 1.0]];
        assert!(matches!(cosine_logits(emb.view(), anchors.view()), Err(Error::DegenerateInput(_))));
        let emb = array![[0.0, 0.0]];
        assert!(matches!(nsl_loss(emb.view(), array![[1.0, 0.0]].view(), &[0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn nsl_hand_evaluation() {
        // cos to own anchor 1, to the orthogonal anchor 0
        let anchors = array![[1.0, 0.0], [0.0, 1.0]];
        let emb = array![[0.5, 0.0]];
        let loss = nsl_loss(emb.view(), anchors.view(), &[0]).unwrap();
        assert!((loss - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn arcface_hand_evaluation() {
        let anchors = array![[1.0, 0.0], [0.0, 1.0]];
        let emb = array![[2.0, 0.0]];
        let cfg = MarginConfig::new(0.2, 20.0).unwrap();
        let loss = arcface_loss(emb.view(), anchors.view(), &[0], cfg).unwrap();
        let t = (20.0 * 0.2f64.cos()).exp();
        let expected = -(t / (t + 1.0)).ln();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn arcface_without_margin_is_nsl() {
        let mut rng = crate::seed::rng(5);
        let emb = random_matrix(&mut rng, 7, 4);
        let anchors = random_matrix(&mut rng, 3, 4);
        let labels = [0, 1, 2, 2, 1, 0, 1];
        let a = arcface_loss(emb.view(), anchors.view(), &labels, MarginConfig::unscaled()).unwrap();
        let n = nsl_loss(emb.view(), anchors.view(), &labels).unwrap();
        assert_eq!(a, n);
    }

    #[test]
    fn margin_config_validation() {
        assert!(MarginConfig::new(0.2, 0.0).is_err());
        assert!(MarginConfig::new(-0.1, 1.0).is_err());
        assert!(MarginConfig::new(FRAC_PI_2, 1.0).is_err());
        assert_eq!(MarginConfig::default(), MarginConfig::new(0.2, 20.0).unwrap());
    }

    #[test]
    fn linear_head_gradient_finite_differences() {
        let mut rng = crate::seed::rng(8);
        let emb = random_matrix(&mut rng, 5, 3);
        let head = LinearHead {
            weights: random_matrix(&mut rng, 4, 3),
            bias: Array1::from_shape_simple_fn(4, || rng.random_range(-1.0..1.0)),
        };
        let labels = [0, 3, 1, 1, 2];
        let g = linear_softmax_loss_grad(emb.view(), &head, &labels).unwrap();
        let h = 1e-5;
        let loss_at = |e: &Array2<f64>, hd: &LinearHead| softmax_ce(hd.logits(e.view()).unwrap().view(), &labels).unwrap();
        for idx in 0..emb.len() {
            let (r, c) = (idx / 3, idx % 3);
            let mut p = emb.clone();
            p[[r, c]] += h;
            let mut m = emb.clone();
            m[[r, c]] -= h;
            let num = (loss_at(&p, &head) - loss_at(&m, &head)) / (2.0 * h);
            assert!((num - g.d_embeddings[[r, c]]).abs() < 1e-8);
        }
        for j in 0..4 {
            let mut p = head.clone();
            p.bias[j] += h;
            let mut m = head.clone();
            m.bias[j] -= h;
            let num = (loss_at(&emb, &p) - loss_at(&emb, &m)) / (2.0 * h);
            assert!((num - g.d_bias.as_ref().unwrap()[j]).abs() < 1e-8);
        }
    }
}
