//! Softmax, normalized softmax and additive-angular-margin losses on one
//! batch, and how the margin changes the true-class logit.
//!
//! cargo run --example margin_losses

use fedfeat::losses::{arcface_loss, arcface_loss_grad, cosine_logits, nsl_loss, softmax_ce, MarginConfig};
use ndarray::array;

fn main() -> fedfeat::Result<()> {
    let embeddings = array![[0.6, 0.5, 0.1], [0.4, 0.7, 0.3], [0.2, 0.5, 0.6]];
    let anchors = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let labels = [0, 1, 2];

    let cos = cosine_logits(embeddings.view(), anchors.view())?;
    println!("cosines\n{cos:.3}");
    println!("plain softmax on raw scores   {:.4}", softmax_ce(embeddings.dot(&anchors.t()).view(), &labels)?);
    println!("normalized softmax            {:.4}", nsl_loss(embeddings.view(), anchors.view(), &labels)?);
    for (m, s) in [(0.0, 1.0), (0.0, 20.0), (0.2, 20.0), (0.5, 20.0)] {
        let cfg = MarginConfig::new(m, s)?;
        println!("arcface m={m:<3} s={s:<4}          {:.4}", arcface_loss(embeddings.view(), anchors.view(), &labels, cfg)?);
    }

    let g = arcface_loss_grad(embeddings.view(), anchors.view(), &labels, MarginConfig::default())?;
    println!("d loss / d embeddings\n{:.4}", g.d_embeddings);
    Ok(())
}
