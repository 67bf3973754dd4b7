//! Finite-difference verification of every analytic gradient in a
//! network, using central differences over each scalar parameter.

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::gru::GruCell;
use crate::net::linear::Dense;
use crate::net::mat::Mat;
use crate::net::norm::Mode;
use crate::net::param::Activation;
use crate::net::shift::ShiftNode;
use crate::net::{loss, Layer, Network};

/// Central-difference step.
pub const CHECK_STEP: f64 = 1e-4;

/// Summed focal loss of the batch under `Mode::TrainStatic`, which uses
/// batch statistics (as training does) without touching running stats,
/// so repeated probes see the exact same function.
pub fn batch_loss(
    net: &mut Network,
    xs: &[Mat],
    labels: &[Vec<usize>],
    gamma: f64,
) -> Result<f64> {
    let (logits, _) = net.forward_batch(xs, Mode::TrainStatic)?;
    let mut total = 0.0;
    for (logit, seq_labels) in logits.iter().zip(labels) {
        let (l, _) = loss::sequence_focal_loss(logit, seq_labels, gamma);
        total += l;
    }
    Ok(total)
}

/// Relative disagreement between an analytic and a numeric gradient.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Which branch every ReLU unit took, flattened over layers, sequences
/// and frames. ReLU outputs are `max(0, z)`, so `y > 0` recovers the
/// branch from the cached activations.
fn relu_signature(net: &Network, caches: &[crate::net::LayerCache]) -> Vec<bool> {
    use crate::net::param::Activation;
    use crate::net::{Layer, LayerCache};
    let mut sig = Vec::new();
    for (layer, cache) in net.layers.iter().zip(caches) {
        let ys = match (layer, cache) {
            (Layer::Dense(d), LayerCache::Dense(c)) if d.act == Activation::Relu => &c.y,
            (Layer::Shift(s), LayerCache::Shift(c)) if s.act == Activation::Relu => &c.y,
            _ => continue,
        };
        for m in ys {
            sig.extend(m.data.iter().map(|&v| v > 0.0));
        }
    }
    sig
}

fn batch_loss_with_signature(
    net: &mut Network,
    xs: &[Mat],
    labels: &[Vec<usize>],
    gamma: f64,
) -> Result<(f64, Vec<bool>)> {
    let (logits, caches) = net.forward_batch(xs, Mode::TrainStatic)?;
    let sig = relu_signature(net, &caches);
    let mut total = 0.0;
    for (logit, seq_labels) in logits.iter().zip(labels) {
        let (l, _) = loss::sequence_focal_loss(logit, seq_labels, gamma);
        total += l;
    }
    Ok((total, sig))
}

/// Uniform random input sequences and frame labels for checking.
pub fn random_batch(
    rng: &mut ChaCha8Rng,
    seqs: usize,
    frames: usize,
    width: usize,
    classes: usize,
) -> (Vec<Mat>, Vec<Vec<usize>>) {
    let mut xs = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..seqs {
        let rows: Vec<Vec<f64>> = (0..frames)
            .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        xs.push(Mat::from_rows(&rows));
        labels.push((0..frames).map(|_| rng.gen_range(0..classes)).collect());
    }
    (xs, labels)
}

/// The standard verification battery: per named architecture stack, the
/// worst relative error over `instances` freshly seeded random
/// instances. Covers fully-connected, recurrent (8-step unroll) and
/// shift stacks with batch norm, plus focal exponents 0, 1 and 2.
pub fn standard_battery(seed: u64, instances: usize) -> Result<Vec<(&'static str, f64)>> {
    let mut worst: Vec<(&'static str, f64)> = vec![
        ("dense", 0.0),
        ("gru-8-step", 0.0),
        ("shift-batchnorm", 0.0),
        ("focal-gamma-0", 0.0),
        ("focal-gamma-2", 0.0),
    ];
    for k in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));

        let mut net = Network::new(vec![
            Layer::Dense(Dense::new(3, 5, true, Activation::Tanh, &mut rng)),
            Layer::Dense(Dense::new(5, 4, true, Activation::Relu, &mut rng)),
            Layer::Dense(Dense::new(4, 3, true, Activation::Identity, &mut rng)),
        ])?;
        let (xs, labels) = random_batch(&mut rng, 2, 6, 3, 3);
        worst[0].1 = worst[0].1.max(grad_check(&mut net, &xs, &labels, 1.0)?);

        let mut net = Network::new(vec![
            Layer::Gru(GruCell::new(3, 4, &mut rng)),
            Layer::Dense(Dense::new(4, 3, true, Activation::Identity, &mut rng)),
        ])?;
        let (xs, labels) = random_batch(&mut rng, 1, 8, 3, 3);
        worst[1].1 = worst[1].1.max(grad_check(&mut net, &xs, &labels, 1.0)?);

        let mut net = Network::new(vec![
            Layer::Shift(ShiftNode::new(3, 5, Activation::Tanh, &mut rng)),
            Layer::Shift(ShiftNode::new(5, 4, Activation::Relu, &mut rng)),
            Layer::Dense(Dense::new(4, 3, true, Activation::Identity, &mut rng)),
        ])?;
        let (xs, labels) = random_batch(&mut rng, 2, 9, 3, 3);
        worst[2].1 = worst[2].1.max(grad_check(&mut net, &xs, &labels, 1.0)?);

        for (slot, gamma) in [(3usize, 0.0), (4, 2.0)] {
            let mut net = Network::new(vec![
                Layer::Dense(Dense::new(3, 4, true, Activation::Tanh, &mut rng)),
                Layer::Dense(Dense::new(4, 3, true, Activation::Identity, &mut rng)),
            ])?;
            let (xs, labels) = random_batch(&mut rng, 2, 5, 3, 3);
            worst[slot].1 = worst[slot].1.max(grad_check(&mut net, &xs, &labels, gamma)?);
        }
    }
    Ok(worst)
}

/// Compares the backpropagated gradient of the summed focal loss against
/// central differences for every parameter scalar; returns the largest
/// relative error found.
///
/// Two refinements keep the comparison meaningful at this step size:
///
/// * probes that flip a ReLU unit to the other branch are excluded —
///   across the kink the central difference measures a blend of the two
///   one-sided slopes, which disagrees with a correct analytic
///   derivative by an amount that does not shrink with the step;
/// * a disagreement smaller than the quantization noise of the probe
///   itself (a few ulps of the loss divided by 2·step) counts as exact
///   agreement. The probe difference for a bias feeding batch
///   normalization is the canonical case: mean subtraction cancels a
///   per-channel constant exactly, the true derivative is zero, and the
///   measured difference is one or two ulps of the loss — sub-noise
///   agreement that the relative-error floor would otherwise misread.
///   Any disagreement above the noise bound is scored normally, so a
///   wrongly nonzero analytic gradient on a flat direction (or a wrongly
///   zero one on a sloped direction) still fails.
pub fn grad_check(net: &mut Network, xs: &[Mat], labels: &[Vec<usize>], gamma: f64) -> Result<f64> {
    // Analytic pass: unscaled loss gradients.
    net.zero_grad();
    let (logits, caches) = net.forward_batch(xs, Mode::TrainStatic)?;
    let base_sig = relu_signature(net, &caches);
    let mut grads = Vec::with_capacity(xs.len());
    for (logit, seq_labels) in logits.iter().zip(labels) {
        let (_, g) = loss::sequence_focal_loss(logit, seq_labels, gamma);
        grads.push(g);
    }
    net.backward_batch(&caches, grads)?;
    let analytic: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.g.clone()).collect();

    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut total = 0usize;
    for (pi, param_grad) in analytic.iter().enumerate() {
        for i in 0..param_grad.len() {
            net.with_param(pi, |p| p.v[i] += CHECK_STEP);
            let (plus, plus_sig) = batch_loss_with_signature(net, xs, labels, gamma)?;
            net.with_param(pi, |p| p.v[i] -= 2.0 * CHECK_STEP);
            let (minus, minus_sig) = batch_loss_with_signature(net, xs, labels, gamma)?;
            net.with_param(pi, |p| p.v[i] += CHECK_STEP);
            total += 1;
            if plus_sig != base_sig || minus_sig != base_sig {
                continue;
            }
            checked += 1;
            let numeric = (plus - minus) / (2.0 * CHECK_STEP);
            // 16 ulps of the loss through the central difference: well
            // above the 1-2 ulps of rounding a probe pair accumulates,
            // and orders of magnitude below any real gradient here.
            let noise =
                16.0 * f64::EPSILON * plus.abs().max(minus.abs()).max(1.0) / (2.0 * CHECK_STEP);
            if (param_grad[i] - numeric).abs() <= noise {
                continue;
            }
            worst = worst.max(relative_error(param_grad[i], numeric));
        }
    }
    if checked * 2 < total {
        return Err(Error::Invalid(format!(
            "only {checked} of {total} parameters could be probed without crossing a ReLU boundary"
        )));
    }
    Ok(worst)
}
