//! Temporal shift: causal feature mixing without recurrence.
//!
//! The shift op replaces the first half of each frame's feature vector
//! with the same features from a fixed number of frames in the past
//! (zeros before history exists); the second half passes through. A
//! shift node wraps the op with an affine map on the shifted features,
//! a bias-free residual map on the unshifted ones, batch normalization
//! over their sum, and a pointwise activation.

use rand::Rng;

use crate::net::linear::Dense;
use crate::net::mat::{add_assign, Mat};
use crate::net::norm::{BatchNorm, BnCache, Mode};
use crate::net::param::Activation;

pub const SHIFT_DISTANCE: usize = 5;

/// Shifts the first `cols/2` features of each frame back by `distance`
/// frames, zero-filling where no past exists. Strictly causal.
pub fn temporal_shift(x: &Mat, distance: usize) -> Mat {
    let half = x.cols / 2;
    let mut y = x.clone();
    for t in 0..x.rows {
        for j in 0..half {
            *y.at_mut(t, j) = if t >= distance {
                x.at(t - distance, j)
            } else {
                0.0
            };
        }
    }
    y
}

/// Scatters gradients of a shifted matrix back onto its input: the
/// exact adjoint of [`temporal_shift`].
pub fn temporal_shift_backward(dy: &Mat, distance: usize) -> Mat {
    let half = dy.cols / 2;
    let mut dx = Mat::zeros(dy.rows, dy.cols);
    for t in 0..dy.rows {
        for j in 0..half {
            if t >= distance {
                *dx.at_mut(t - distance, j) += dy.at(t, j);
            }
        }
        for j in half..dy.cols {
            *dx.at_mut(t, j) += dy.at(t, j);
        }
    }
    dx
}

/// shift → affine, plus bias-free residual affine on the raw input,
/// summed, batch-normalized, activated.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftNode {
    pub shift_fc: Dense,
    pub residual_fc: Dense,
    pub bn: BatchNorm,
    pub act: Activation,
    pub distance: usize,
}

#[derive(Debug, Clone)]
pub struct ShiftNodeCache {
    pub shift_branch: crate::net::linear::DenseCache,
    pub residual_branch: crate::net::linear::DenseCache,
    pub bn: BnCache,
    pub bn_mode: Mode,
    /// Activated outputs, for the activation derivative.
    pub y: Vec<Mat>,
}

impl ShiftNode {
    pub fn new(in_width: usize, width: usize, act: Activation, rng: &mut impl Rng) -> ShiftNode {
        ShiftNode {
            shift_fc: Dense::new(in_width, width, true, Activation::Identity, rng),
            residual_fc: Dense::new(in_width, width, false, Activation::Identity, rng),
            bn: BatchNorm::new(width),
            act,
            distance: SHIFT_DISTANCE,
        }
    }

    pub fn in_width(&self) -> usize {
        self.shift_fc.in_width()
    }

    pub fn out_width(&self) -> usize {
        self.shift_fc.out_width()
    }

    pub fn forward(&mut self, xs: &[Mat], mode: Mode) -> (Vec<Mat>, ShiftNodeCache) {
        let shifted: Vec<Mat> = xs.iter().map(|x| temporal_shift(x, self.distance)).collect();
        let (mut sums, shift_branch) = self.shift_fc.forward(&shifted);
        let (residuals, residual_branch) = self.residual_fc.forward(xs);
        for (s, r) in sums.iter_mut().zip(&residuals) {
            add_assign(&mut s.data, &r.data);
        }
        let (normed, bn_cache) = self.bn.forward(&sums, mode);
        let mut ys = normed;
        for y in ys.iter_mut() {
            for v in y.data.iter_mut() {
                *v = self.act.apply(*v);
            }
        }
        let cache = ShiftNodeCache {
            shift_branch,
            residual_branch,
            bn: bn_cache,
            bn_mode: mode,
            y: ys.clone(),
        };
        (ys, cache)
    }

    /// Inference-only pass over frozen normalization statistics.
    pub fn forward_infer(&self, xs: &[Mat]) -> Vec<Mat> {
        let shifted: Vec<Mat> = xs.iter().map(|x| temporal_shift(x, self.distance)).collect();
        let (mut sums, _) = self.shift_fc.forward(&shifted);
        let (residuals, _) = self.residual_fc.forward(xs);
        for (s, r) in sums.iter_mut().zip(&residuals) {
            add_assign(&mut s.data, &r.data);
        }
        let mut ys = self.bn.forward_infer(&sums);
        for y in ys.iter_mut() {
            for v in y.data.iter_mut() {
                *v = self.act.apply(*v);
            }
        }
        ys
    }

    pub fn backward(&mut self, cache: &ShiftNodeCache, dys: &[Mat]) -> Vec<Mat> {
        // Activation.
        let mut dnormed = Vec::with_capacity(dys.len());
        for (dy, y) in dys.iter().zip(&cache.y) {
            let mut d = dy.clone();
            for (dv, yv) in d.data.iter_mut().zip(&y.data) {
                *dv *= self.act.derivative_from_output(*yv);
            }
            dnormed.push(d);
        }
        // Batch norm.
        let dsums = match cache.bn_mode {
            Mode::Infer => self.bn.backward_frozen(&cache.bn, &dnormed),
            _ => self.bn.backward(&cache.bn, &dnormed),
        };
        // The sum fans the same gradient into both branches.
        let dshifted = self.shift_fc.backward(&cache.shift_branch, &dsums);
        let dres = self.residual_fc.backward(&cache.residual_branch, &dsums);

        let mut dxs = Vec::with_capacity(dys.len());
        for (ds, dr) in dshifted.iter().zip(&dres) {
            let mut dx = temporal_shift_backward(ds, self.distance);
            add_assign(&mut dx.data, &dr.data);
            dxs.push(dx);
        }
        dxs
    }
}
