//! Per-feature batch normalization with running statistics.
//!
//! Training passes normalize with statistics pooled over every frame of
//! every sequence in the batch and fold them into the running estimates;
//! inference uses the frozen running estimates only, which keeps
//! prediction causal and bit-reproducible.

use crate::net::mat::Mat;
use crate::net::param::Param;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// How a forward pass treats normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running estimates updated.
    Train,
    /// Batch statistics; running estimates untouched (finite-difference
    /// probing must not mutate state).
    TrainStatic,
    /// Frozen running estimates.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Normalized inputs and the inverse spread of the pass, kept for the
/// backward formula.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<Mat>,
    pub inv_std: Vec<f64>,
    pub n: usize,
}

impl BatchNorm {
    pub fn new(width: usize) -> BatchNorm {
        let mut gamma = Param::zeros(width, 1);
        gamma.v.iter_mut().for_each(|v| *v = 1.0);
        BatchNorm {
            gamma,
            beta: Param::zeros(width, 1),
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&mut self, xs: &[Mat], mode: Mode) -> (Vec<Mat>, BnCache) {
        let d = self.width();
        let n: usize = xs.iter().map(|x| x.rows).sum();
        let (mean, var) = match mode {
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone()),
            Mode::Train | Mode::TrainStatic => {
                let mut mean = vec![0.0; d];
                for x in xs {
                    for t in 0..x.rows {
                        for (m, v) in mean.iter_mut().zip(x.row(t)) {
                            *m += v;
                        }
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; d];
                for x in xs {
                    for t in 0..x.rows {
                        for (j, v) in x.row(t).iter().enumerate() {
                            let diff = v - mean[j];
                            var[j] += diff * diff;
                        }
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                if mode == Mode::Train {
                    for j in 0..d {
                        self.running_mean[j] =
                            BN_MOMENTUM * self.running_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                        self.running_var[j] =
                            BN_MOMENTUM * self.running_var[j] + (1.0 - BN_MOMENTUM) * var[j];
                    }
                }
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();

        let mut xhats = Vec::with_capacity(xs.len());
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            let mut xhat = x.clone();
            for t in 0..xhat.rows {
                for (j, v) in xhat.row_mut(t).iter_mut().enumerate() {
                    *v = (*v - mean[j]) * inv_std[j];
                }
            }
            let mut y = xhat.clone();
            for t in 0..y.rows {
                for (j, v) in y.row_mut(t).iter_mut().enumerate() {
                    *v = self.gamma.v[j] * *v + self.beta.v[j];
                }
            }
            xhats.push(xhat);
            ys.push(y);
        }
        (ys, BnCache {
            xhat: xhats,
            inv_std,
            n,
        })
    }

    /// Inference-only pass over frozen running statistics; never
    /// mutates, so frozen models can be shared across readers.
    pub fn forward_infer(&self, xs: &[Mat]) -> Vec<Mat> {
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|v| 1.0 / (v + BN_EPS).sqrt())
            .collect();
        xs.iter()
            .map(|x| {
                let mut y = x.clone();
                for t in 0..y.rows {
                    for (j, v) in y.row_mut(t).iter_mut().enumerate() {
                        let xhat = (*v - self.running_mean[j]) * inv_std[j];
                        *v = self.gamma.v[j] * xhat + self.beta.v[j];
                    }
                }
                y
            })
            .collect()
    }

    /// Backward through a batch-statistics pass. The pooled terms make
    /// every input frame's gradient depend on the whole batch, exactly
    /// as the normalization itself does.
    pub fn backward(&mut self, cache: &BnCache, dys: &[Mat]) -> Vec<Mat> {
        let d = self.width();
        let n = cache.n as f64;
        // Pooled sums per feature.
        let mut sum_dxhat = vec![0.0; d];
        let mut sum_dxhat_xhat = vec![0.0; d];
        for (dy, xhat) in dys.iter().zip(&cache.xhat) {
            for t in 0..dy.rows {
                for (j, (g, xh)) in dy.row(t).iter().zip(xhat.row(t)).enumerate() {
                    let dxh = g * self.gamma.v[j];
                    sum_dxhat[j] += dxh;
                    sum_dxhat_xhat[j] += dxh * xh;
                    self.gamma.g[j] += g * xh;
                    self.beta.g[j] += g;
                }
            }
        }
        let mut dxs = Vec::with_capacity(dys.len());
        for (dy, xhat) in dys.iter().zip(&cache.xhat) {
            let mut dx = Mat::zeros(dy.rows, d);
            for t in 0..dy.rows {
                for j in 0..d {
                    let dxh = dy.at(t, j) * self.gamma.v[j];
                    *dx.at_mut(t, j) = cache.inv_std[j] / n
                        * (n * dxh - sum_dxhat[j] - xhat.at(t, j) * sum_dxhat_xhat[j]);
                }
            }
            dxs.push(dx);
        }
        dxs
    }

    /// Backward through an `Infer`-mode pass (fixed statistics): the
    /// map is affine per feature.
    pub fn backward_frozen(&mut self, cache: &BnCache, dys: &[Mat]) -> Vec<Mat> {
        let d = self.width();
        let mut dxs = Vec::with_capacity(dys.len());
        for (dy, xhat) in dys.iter().zip(&cache.xhat) {
            let mut dx = Mat::zeros(dy.rows, d);
            for t in 0..dy.rows {
                for (j, g) in dy.row(t).iter().enumerate() {
                    self.gamma.g[j] += g * xhat.at(t, j);
                    self.beta.g[j] += g;
                    *dx.at_mut(t, j) = g * self.gamma.v[j] * cache.inv_std[j];
                }
            }
            dxs.push(dx);
        }
        dxs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_pass_normalizes_pooled_batch() {
        let mut bn = BatchNorm::new(2);
        let a = Mat::from_rows(&[vec![1.0, 10.0], vec![3.0, 30.0]]);
        let b = Mat::from_rows(&[vec![5.0, 50.0], vec![7.0, 70.0]]);
        let (ys, _) = bn.forward(&[a, b], Mode::TrainStatic);
        // Pooled over 4 frames per feature: mean 0, variance 1.
        for j in 0..2 {
            let vals: Vec<f64> = ys.iter().flat_map(|y| (0..y.rows).map(move |t| y.at(t, j))).collect();
            let mean: f64 = vals.iter().sum::<f64>() / 4.0;
            let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4); // BN_EPS shifts it slightly
        }
    }

    #[test]
    fn running_stats_update_only_in_train_mode() {
        let mut bn = BatchNorm::new(1);
        let x = Mat::from_rows(&[vec![10.0], vec![20.0]]);
        bn.forward(std::slice::from_ref(&x), Mode::TrainStatic);
        assert_eq!(bn.running_mean, vec![0.0]);
        bn.forward(std::slice::from_ref(&x), Mode::Train);
        // momentum 0.9: 0.9·0 + 0.1·15 = 1.5; var: 0.9·1 + 0.1·25 = 3.4
        assert!((bn.running_mean[0] - 1.5).abs() < 1e-12);
        assert!((bn.running_var[0] - 3.4).abs() < 1e-12);
    }

    #[test]
    fn inference_is_frozen_and_repeatable() {
        let mut bn = BatchNorm::new(1);
        bn.running_mean = vec![2.0];
        bn.running_var = vec![4.0];
        let x = Mat::from_rows(&[vec![6.0]]);
        let (y1, _) = bn.forward(std::slice::from_ref(&x), Mode::Infer);
        let (y2, _) = bn.forward(std::slice::from_ref(&x), Mode::Infer);
        assert_eq!(y1, y2);
        // (6−2)/√(4+ε) ≈ 2
        assert!((y1[0].at(0, 0) - 2.0).abs() < 1e-5);
    }
}
