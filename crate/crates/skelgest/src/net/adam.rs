//! Adam parameter updates with bias correction.

use crate::net::param::Param;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig::with_lr(2e-4)
    }
}

/// Optimizer state beyond the per-parameter moments (those live in
/// [`Param`]): just the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Adam {
        Adam { config, t: 0 }
    }

    /// Starts a new update step; call [`Adam::update_param`] on every
    /// parameter afterwards.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    pub fn update_param(&self, p: &mut Param) {
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..p.v.len() {
            let g = p.g[i];
            p.m[i] = c.beta1 * p.m[i] + (1.0 - c.beta1) * g;
            p.s[i] = c.beta2 * p.s[i] + (1.0 - c.beta2) * g * g;
            let m_hat = p.m[i] / bc1;
            let s_hat = p.s[i] / bc2;
            p.v[i] -= c.lr * m_hat / (s_hat.sqrt() + c.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        // m̂ = 1, ŝ = 1 after bias correction, so Δ ≈ −lr/(1+ε).
        let mut p = Param::zeros(1, 1);
        p.g[0] = 1.0;
        let mut adam = Adam::new(AdamConfig::with_lr(0.01));
        adam.begin_step();
        adam.update_param(&mut p);
        let expect = -0.01 / (1.0 + 1e-8);
        assert!((p.v[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut p = Param::zeros(2, 2);
        p.v = vec![1.0, -2.0, 3.0, 4.0];
        let before = p.v.clone();
        let mut adam = Adam::new(AdamConfig::default());
        adam.begin_step();
        adam.update_param(&mut p);
        assert_eq!(p.v, before);
    }

    #[test]
    fn constant_gradient_keeps_moving_the_same_way() {
        let mut p = Param::zeros(1, 1);
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let mut prev = 0.0;
        for _ in 0..10 {
            p.g[0] = 2.0;
            adam.begin_step();
            adam.update_param(&mut p);
            assert!(p.v[0] < prev);
            prev = p.v[0];
        }
    }
}
