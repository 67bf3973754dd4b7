//! Fully connected layer with optional bias and pointwise activation,
//! applied independently to every frame of a sequence.

use rand::Rng;

use crate::net::mat::{add_assign, matmul_nn, matmul_nt, matmul_tn, Mat};
use crate::net::param::{Activation, Param};

/// `y_t = act(W x_t [+ b])` per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Param,
    /// Absent for bias-free layers.
    pub b: Option<Param>,
    pub act: Activation,
}

/// Cached activations of one forward pass (one matrix per sequence).
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<Mat>,
    pub y: Vec<Mat>,
}

impl Dense {
    pub fn new(
        in_width: usize,
        out_width: usize,
        bias: bool,
        act: Activation,
        rng: &mut impl Rng,
    ) -> Dense {
        Dense {
            w: Param::uniform(out_width, in_width, in_width, rng),
            b: bias.then(|| Param::zeros(out_width, 1)),
            act,
        }
    }

    pub fn in_width(&self) -> usize {
        self.w.cols
    }

    pub fn out_width(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, xs: &[Mat]) -> (Vec<Mat>, DenseCache) {
        let w = self.w.mat();
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            let mut y = matmul_nt(x, &w);
            if let Some(b) = &self.b {
                for t in 0..y.rows {
                    add_assign(y.row_mut(t), &b.v);
                }
            }
            for v in y.data.iter_mut() {
                *v = self.act.apply(*v);
            }
            ys.push(y);
        }
        let cache = DenseCache {
            x: xs.to_vec(),
            y: ys.clone(),
        };
        (ys, cache)
    }

    /// Accumulates parameter gradients and returns the input gradients.
    pub fn backward(&mut self, cache: &DenseCache, dys: &[Mat]) -> Vec<Mat> {
        let w = self.w.mat();
        let mut dxs = Vec::with_capacity(dys.len());
        for (i, dy) in dys.iter().enumerate() {
            // Through the activation first.
            let mut dpre = dy.clone();
            for (dp, y) in dpre.data.iter_mut().zip(&cache.y[i].data) {
                *dp *= self.act.derivative_from_output(*y);
            }
            let dw = matmul_tn(&dpre, &cache.x[i]);
            add_assign(&mut self.w.g, &dw.data);
            if let Some(b) = self.b.as_mut() {
                for t in 0..dpre.rows {
                    add_assign(&mut b.g, dpre.row(t));
                }
            }
            dxs.push(matmul_nn(&dpre, &w));
        }
        dxs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weight_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer = Dense::new(3, 3, true, Activation::Identity, &mut rng);
        layer.w.v = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let x = Mat::from_rows(&[vec![0.5, -2.0, 3.0], vec![1.0, 1.0, 1.0]]);
        let (y, _) = layer.forward(std::slice::from_ref(&x));
        assert_eq!(y[0], x);
    }

    #[test]
    fn toy_two_layer_matches_hand_arithmetic() {
        // 2→2 tanh then 2→1 identity with hand-picked weights.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l1 = Dense::new(2, 2, true, Activation::Tanh, &mut rng);
        l1.w.v = vec![0.5, -0.25, 1.0, 0.75];
        l1.b.as_mut().unwrap().v = vec![0.1, -0.2];
        let mut l2 = Dense::new(2, 1, false, Activation::Identity, &mut rng);
        l2.w.v = vec![2.0, -1.0];

        let x = Mat::from_rows(&[vec![0.3, 0.9]]);
        let (h, _) = l1.forward(std::slice::from_ref(&x));
        let (y, _) = l2.forward(&h);

        let h0 = (0.5f64 * 0.3 - 0.25 * 0.9 + 0.1).tanh();
        let h1 = (1.0f64 * 0.3 + 0.75 * 0.9 - 0.2).tanh();
        let expect = 2.0 * h0 - 1.0 * h1;
        assert!((y[0].at(0, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn backward_shapes_and_bias_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut layer = Dense::new(4, 2, true, Activation::Identity, &mut rng);
        let x = Mat::from_rows(&[vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]]);
        let (_, cache) = layer.forward(std::slice::from_ref(&x));
        let dy = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        let dx = layer.backward(&cache, std::slice::from_ref(&dy));
        assert_eq!(dx[0].rows, 3);
        assert_eq!(dx[0].cols, 4);
        // Bias grad for output 0 sums dy over frames = 3.
        assert_eq!(layer.b.as_ref().unwrap().g, vec![3.0, 0.0]);
    }
}
