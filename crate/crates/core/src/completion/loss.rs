use crate::error::{Error, Result};
use crate::neuralnet::{sigmoid_scalar, softplus, Tensor};
use crate::rng::Rng;

use super::network::{Discriminator, Generator, NetGrads};

/// Mean squared error over every element and its gradient.
pub fn l2_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "l2 loss: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.data().len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor::from_vec(pred.shape(), grad)?))
}

/// `mean(-log D)` and `mean(-log(1 - D))` over logits, with their gradients.
fn bce_real(logits: &Tensor) -> (f64, Tensor) {
    let n = logits.data().len() as f64;
    let loss = logits.data().iter().map(|&l| softplus(-l)).sum::<f64>() / n;
    (loss, logits.map(|l| (sigmoid_scalar(l) - 1.0) / n))
}

fn bce_fake(logits: &Tensor) -> (f64, Tensor) {
    let n = logits.data().len() as f64;
    let loss = logits.data().iter().map(|&l| softplus(l)).sum::<f64>() / n;
    (loss, logits.map(|l| sigmoid_scalar(l) / n))
}

#[derive(Debug, Clone)]
pub struct GanLosses {
    pub d_loss: f64,
    pub g_loss: f64,
    /// Adversarial part of `g_loss`.
    pub g_adv: f64,
    pub l2: f64,
    pub d_grads: NetGrads,
    pub g_grads: NetGrads,
}

/// Conditional GAN objectives on one batch.
///
/// `d_loss = -E[log D(real | c)] - E[log(1 - D(G(c) | c))]`,
/// `g_loss = -E[log D(G(c) | c)] + lambda * L2(G(c), real)`.
/// The condition `c` is the image channel of `input`; both gradient sets are
/// taken at the current parameters.
pub fn gan_losses(
    d: &Discriminator,
    g: &Generator,
    input: &Tensor,
    target: &Tensor,
    lambda: f64,
    noise: Option<&mut Rng>,
) -> Result<GanLosses> {
    let (fake, g_trace) = g.forward(input, noise)?;
    let cond = input.select_channels(0, 1);
    let real_pair = Tensor::concat_channels(&cond, &target.select_channels(0, 1))?;
    let fake_pair = Tensor::concat_channels(&cond, &fake.select_channels(0, 1))?;

    let (real_logits, real_trace) = d.forward(&real_pair)?;
    let (fake_logits, fake_trace) = d.forward(&fake_pair)?;

    let (lr, glr) = bce_real(&real_logits);
    let (lf, glf) = bce_fake(&fake_logits);
    let d_loss = lr + lf;
    let (mut d_grads, _) = d.backward(&real_trace, &glr)?;
    d_grads.accumulate(&d.backward(&fake_trace, &glf)?.0);

    let (g_adv, g_adv_grad) = bce_real(&fake_logits);
    let (_, g_pair) = d.backward(&fake_trace, &g_adv_grad)?;
    let (l2, l2_grad) = l2_loss(&fake, target)?;
    let mut g_out = l2_grad.scale(lambda);
    let n_img = g_out.height() * g_out.width();
    for i in 0..fake.batch() {
        let from = g_pair.plane(i, 1).to_vec();
        let s = g_out.sample_mut(i);
        for (a, b) in s[..n_img].iter_mut().zip(from) {
            *a += b;
        }
    }
    let (g_grads, _) = g.backward(&g_trace, &g_out)?;
    let g_loss = g_adv + lambda * l2;
    for (name, v) in [("d_loss", d_loss), ("g_loss", g_loss)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    Ok(GanLosses {
        d_loss,
        g_loss,
        g_adv,
        l2,
        d_grads,
        g_grads,
    })
}
