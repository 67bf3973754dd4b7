//! Gated recurrent cell with hand-derived backpropagation through time.
//!
//! Per step, with σ the logistic function and ∘ elementwise product:
//!
//! ```text
//! r_t = σ(Wxr·x_t + bxr + Whr·h_{t−1} + bhr)
//! u_t = σ(Wxu·x_t + bxu + Whu·h_{t−1} + bhu)
//! c_t = tanh(Wxc·x_t + bxc + r_t ∘ (Whc·h_{t−1} + bhc))
//! h_t = u_t ∘ h_{t−1} + (1 − u_t) ∘ c_t
//! ```
//!
//! The initial state is zero. Both gates stay in (0,1), so each state
//! component is a convex combination of its previous value and a tanh
//! output and can never leave [−max(|h₀|,1), max(|h₀|,1)].

use rand::Rng;

use crate::net::mat::{add_assign, matvec, matvec_t, outer_acc, Mat};
use crate::net::param::Param;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub wxr: Param,
    pub whr: Param,
    pub bxr: Param,
    pub bhr: Param,
    pub wxu: Param,
    pub whu: Param,
    pub bxu: Param,
    pub bhu: Param,
    pub wxc: Param,
    pub whc: Param,
    pub bxc: Param,
    pub bhc: Param,
}

/// Per-sequence intermediate values kept for the backward sweep.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Mat,
    /// h has T+1 rows; row 0 is the zero initial state.
    pub h: Mat,
    pub r: Mat,
    pub u: Mat,
    pub c: Mat,
    /// s_t = Whc·h_{t−1} + bhc (the reset-gated recurrent term).
    pub s: Mat,
}

impl GruCell {
    pub fn new(in_width: usize, hidden: usize, rng: &mut impl Rng) -> GruCell {
        GruCell {
            wxr: Param::uniform(hidden, in_width, in_width, rng),
            whr: Param::uniform(hidden, hidden, hidden, rng),
            bxr: Param::zeros(hidden, 1),
            bhr: Param::zeros(hidden, 1),
            wxu: Param::uniform(hidden, in_width, in_width, rng),
            whu: Param::uniform(hidden, hidden, hidden, rng),
            bxu: Param::zeros(hidden, 1),
            bhu: Param::zeros(hidden, 1),
            wxc: Param::uniform(hidden, in_width, in_width, rng),
            whc: Param::uniform(hidden, hidden, hidden, rng),
            bxc: Param::zeros(hidden, 1),
            bhc: Param::zeros(hidden, 1),
        }
    }

    pub fn in_width(&self) -> usize {
        self.wxr.cols
    }

    pub fn hidden(&self) -> usize {
        self.wxr.rows
    }

    /// One step from an explicit previous state; used by the sequence
    /// forward and directly testable against a scalar oracle.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> GruStep {
        let wxr = self.wxr.mat();
        let whr = self.whr.mat();
        let wxu = self.wxu.mat();
        let whu = self.whu.mat();
        let wxc = self.wxc.mat();
        let whc = self.whc.mat();
        let d = self.hidden();

        let mut ar = matvec(&wxr, x);
        add_assign(&mut ar, &self.bxr.v);
        let hr = matvec(&whr, h_prev);
        add_assign(&mut ar, &hr);
        add_assign(&mut ar, &self.bhr.v);
        let r: Vec<f64> = ar.iter().map(|&a| sigmoid(a)).collect();

        let mut au = matvec(&wxu, x);
        add_assign(&mut au, &self.bxu.v);
        let hu = matvec(&whu, h_prev);
        add_assign(&mut au, &hu);
        add_assign(&mut au, &self.bhu.v);
        let u: Vec<f64> = au.iter().map(|&a| sigmoid(a)).collect();

        let mut s = matvec(&whc, h_prev);
        add_assign(&mut s, &self.bhc.v);
        let mut ac = matvec(&wxc, x);
        add_assign(&mut ac, &self.bxc.v);
        for i in 0..d {
            ac[i] += r[i] * s[i];
        }
        let c: Vec<f64> = ac.iter().map(|&a| a.tanh()).collect();

        let mut h = vec![0.0; d];
        for i in 0..d {
            h[i] = u[i] * h_prev[i] + (1.0 - u[i]) * c[i];
        }
        GruStep { r, u, c, s, h }
    }

    pub fn forward(&self, xs: &[Mat]) -> (Vec<Mat>, Vec<GruCache>) {
        let d = self.hidden();
        let mut ys = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let t_len = x.rows;
            let mut h = Mat::zeros(t_len + 1, d);
            let mut r = Mat::zeros(t_len, d);
            let mut u = Mat::zeros(t_len, d);
            let mut c = Mat::zeros(t_len, d);
            let mut s = Mat::zeros(t_len, d);
            for t in 0..t_len {
                let prev = h.row(t).to_vec();
                let step = self.step(x.row(t), &prev);
                h.row_mut(t + 1).copy_from_slice(&step.h);
                r.row_mut(t).copy_from_slice(&step.r);
                u.row_mut(t).copy_from_slice(&step.u);
                c.row_mut(t).copy_from_slice(&step.c);
                s.row_mut(t).copy_from_slice(&step.s);
            }
            let mut y = Mat::zeros(t_len, d);
            for t in 0..t_len {
                y.row_mut(t).copy_from_slice(h.row(t + 1));
            }
            ys.push(y);
            caches.push(GruCache {
                x: x.clone(),
                h,
                r,
                u,
                c,
                s,
            });
        }
        (ys, caches)
    }

    /// Backward through time for a batch; accumulates parameter
    /// gradients and returns per-sequence input gradients.
    pub fn backward(&mut self, caches: &[GruCache], dys: &[Mat]) -> Vec<Mat> {
        let d = self.hidden();
        let whr = self.whr.mat();
        let whu = self.whu.mat();
        let whc = self.whc.mat();
        let wxr = self.wxr.mat();
        let wxu = self.wxu.mat();
        let wxc = self.wxc.mat();

        let mut wxr_g = Mat::zeros(d, self.in_width());
        let mut whr_g = Mat::zeros(d, d);
        let mut wxu_g = Mat::zeros(d, self.in_width());
        let mut whu_g = Mat::zeros(d, d);
        let mut wxc_g = Mat::zeros(d, self.in_width());
        let mut whc_g = Mat::zeros(d, d);

        let mut dxs = Vec::with_capacity(dys.len());
        for (cache, dy) in caches.iter().zip(dys) {
            let t_len = cache.x.rows;
            let mut dx = Mat::zeros(t_len, self.in_width());
            let mut dh_next = vec![0.0; d]; // gradient flowing into h_t from t+1
            for t in (0..t_len).rev() {
                let mut dh: Vec<f64> = dy.row(t).to_vec();
                add_assign(&mut dh, &dh_next);

                let r = cache.r.row(t);
                let u = cache.u.row(t);
                let c = cache.c.row(t);
                let s = cache.s.row(t);
                let h_prev = cache.h.row(t);

                // h = u∘h_prev + (1−u)∘c
                let mut du = vec![0.0; d];
                let mut dc = vec![0.0; d];
                let mut dh_prev = vec![0.0; d];
                for i in 0..d {
                    du[i] = dh[i] * (h_prev[i] - c[i]);
                    dc[i] = dh[i] * (1.0 - u[i]);
                    dh_prev[i] = dh[i] * u[i];
                }
                // c = tanh(a_c), a_c = Wxc x + bxc + r∘s
                let mut da_c = vec![0.0; d];
                let mut dr = vec![0.0; d];
                let mut ds = vec![0.0; d];
                for i in 0..d {
                    da_c[i] = dc[i] * (1.0 - c[i] * c[i]);
                    dr[i] = da_c[i] * s[i];
                    ds[i] = da_c[i] * r[i];
                }
                // Gate pre-activations through the logistic derivative.
                let mut da_r = vec![0.0; d];
                let mut da_u = vec![0.0; d];
                for i in 0..d {
                    da_r[i] = dr[i] * r[i] * (1.0 - r[i]);
                    da_u[i] = du[i] * u[i] * (1.0 - u[i]);
                }

                // Parameter gradients.
                outer_acc(&mut wxr_g, &da_r, cache.x.row(t));
                outer_acc(&mut whr_g, &da_r, h_prev);
                add_assign(&mut self.bxr.g, &da_r);
                add_assign(&mut self.bhr.g, &da_r);
                outer_acc(&mut wxu_g, &da_u, cache.x.row(t));
                outer_acc(&mut whu_g, &da_u, h_prev);
                add_assign(&mut self.bxu.g, &da_u);
                add_assign(&mut self.bhu.g, &da_u);
                outer_acc(&mut wxc_g, &da_c, cache.x.row(t));
                outer_acc(&mut whc_g, &ds, h_prev);
                add_assign(&mut self.bxc.g, &da_c);
                add_assign(&mut self.bhc.g, &ds);

                // Upstream gradients.
                add_assign(&mut dh_prev, &matvec_t(&whr, &da_r));
                add_assign(&mut dh_prev, &matvec_t(&whu, &da_u));
                add_assign(&mut dh_prev, &matvec_t(&whc, &ds));
                let mut dx_t = matvec_t(&wxr, &da_r);
                add_assign(&mut dx_t, &matvec_t(&wxu, &da_u));
                add_assign(&mut dx_t, &matvec_t(&wxc, &da_c));
                dx.row_mut(t).copy_from_slice(&dx_t);
                dh_next = dh_prev;
            }
            dxs.push(dx);
        }
        add_assign(&mut self.wxr.g, &wxr_g.data);
        add_assign(&mut self.whr.g, &whr_g.data);
        add_assign(&mut self.wxu.g, &wxu_g.data);
        add_assign(&mut self.whu.g, &whu_g.data);
        add_assign(&mut self.wxc.g, &wxc_g.data);
        add_assign(&mut self.whc.g, &whc_g.data);
        dxs
    }
}

/// One step's gate values and new state.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
}
