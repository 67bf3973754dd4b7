//! Softmax and the focusing loss used to train the per-frame labelers.
//!
//! With `u` the probability assigned to the true class, the loss is
//! `−(1−u)^γ · log(u)`: at γ=0 it is plain cross-entropy, larger γ
//! down-weights frames the model already gets right — useful here
//! because idle frames vastly outnumber gesture frames.

use crate::net::mat::Mat;

/// Probability floor before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Loss for one probability row. `p` must come from a softmax.
pub fn focal_loss(p: &[f64], true_class: usize, gamma: f64) -> f64 {
    let u = p[true_class].max(PROB_CLAMP);
    -(1.0 - u).powf(gamma) * u.ln()
}

/// Gradient of [`focal_loss`] with respect to the logits that produced
/// `p`. At γ=0 this is exactly `p − one_hot(true_class)`.
pub fn focal_grad_logits(p: &[f64], true_class: usize, gamma: f64) -> Vec<f64> {
    let u = p[true_class].max(PROB_CLAMP);
    let one_minus = 1.0 - u;
    // d/du of −(1−u)^γ·ln(u), multiplied by u (the softmax factor):
    // γ·u·(1−u)^{γ−1}·ln(u) − (1−u)^γ. The first term vanishes in the
    // u→1 limit for every γ ≥ 0, so guard the (1−u)^{γ−1} singularity.
    let term1 = if gamma == 0.0 || one_minus < PROB_CLAMP {
        0.0
    } else {
        gamma * u * one_minus.powf(gamma - 1.0) * u.ln()
    };
    let factor = term1 - one_minus.powf(gamma);
    p.iter()
        .enumerate()
        .map(|(j, &pj)| {
            let delta = if j == true_class { 1.0 } else { 0.0 };
            factor * (delta - pj)
        })
        .collect()
}

/// Sum of per-frame losses over a logit matrix plus the matching logit
/// gradients (unscaled; callers divide by their frame count).
pub fn sequence_focal_loss(logits: &Mat, labels: &[usize], gamma: f64) -> (f64, Mat) {
    assert_eq!(logits.rows, labels.len(), "one label per frame");
    let mut total = 0.0;
    let mut grad = Mat::zeros(logits.rows, logits.cols);
    for t in 0..logits.rows {
        let p = softmax(logits.row(t));
        total += focal_loss(&p, labels[t], gamma);
        grad.row_mut(t)
            .copy_from_slice(&focal_grad_logits(&p, labels[t], gamma));
    }
    (total, grad)
}
