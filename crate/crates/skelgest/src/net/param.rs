//! Learnable parameter storage: values, gradient accumulator and the
//! optimizer's moment estimates live side by side so every layer and
//! the optimizer can walk them uniformly.

use rand::Rng;

use crate::net::mat::Mat;

/// One parameter tensor (matrix or vector) with its gradient and Adam
/// moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub rows: usize,
    pub cols: usize,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    /// First-moment (mean) estimate.
    pub m: Vec<f64>,
    /// Second-moment (uncentered variance) estimate.
    pub s: Vec<f64>,
}

impl Param {
    pub fn zeros(rows: usize, cols: usize) -> Param {
        let n = rows * cols;
        Param {
            rows,
            cols,
            v: vec![0.0; n],
            g: vec![0.0; n],
            m: vec![0.0; n],
            s: vec![0.0; n],
        }
    }

    /// Seeded uniform init in ±1/√fan_in.
    pub fn uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Param {
        let mut p = Param::zeros(rows, cols);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in p.v.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.iter_mut().for_each(|g| *g = 0.0);
    }

    /// View of the values as a matrix (no copy of shape bookkeeping).
    pub fn mat(&self) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.v.clone(),
        }
    }
}

/// Pointwise activation applied by dense layers and shift nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Activation> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}
