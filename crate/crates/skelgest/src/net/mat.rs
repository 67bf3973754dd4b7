//! Minimal dense row-major matrix used by the sequence networks. Plain
//! nested loops are fast enough at this scale and keep the numerics
//! bit-reproducible across platforms.

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `x · wᵀ`: (T×in) · (out×in)ᵀ → T×out. The layout matches per-frame
/// affine maps `y_t = W x_t`.
pub fn matmul_nt(x: &Mat, w: &Mat) -> Mat {
    assert_eq!(x.cols, w.cols, "inner dimensions");
    let mut y = Mat::zeros(x.rows, w.rows);
    for t in 0..x.rows {
        let xr = x.row(t);
        for o in 0..w.rows {
            let wr = w.row(o);
            let mut acc = 0.0;
            for i in 0..x.cols {
                acc += xr[i] * wr[i];
            }
            *y.at_mut(t, o) = acc;
        }
    }
    y
}

/// `aᵀ · b`: (T×out)ᵀ · (T×in) → out×in. Used to accumulate weight
/// gradients over frames.
pub fn matmul_tn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows, "frame counts");
    let mut y = Mat::zeros(a.cols, b.cols);
    for t in 0..a.rows {
        let ar = a.row(t);
        let br = b.row(t);
        for o in 0..a.cols {
            let g = ar[o];
            if g == 0.0 {
                continue;
            }
            let yr = y.row_mut(o);
            for i in 0..b.cols {
                yr[i] += g * br[i];
            }
        }
    }
    y
}

/// `a · b`: (T×out) · (out×in) → T×in. Used to push gradients through
/// a weight matrix.
pub fn matmul_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    let mut y = Mat::zeros(a.rows, b.cols);
    for t in 0..a.rows {
        let ar = a.row(t);
        let yr = y.row_mut(t);
        for o in 0..a.cols {
            let g = ar[o];
            if g == 0.0 {
                continue;
            }
            let br = b.row(o);
            for i in 0..b.cols {
                yr[i] += g * br[i];
            }
        }
    }
    y
}

/// `w · x` for a single vector: (out×in) · in → out.
pub fn matvec(w: &Mat, x: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols, x.len(), "inner dimensions");
    let mut y = vec![0.0; w.rows];
    for (o, yo) in y.iter_mut().enumerate() {
        let wr = w.row(o);
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc += wr[i] * x[i];
        }
        *yo = acc;
    }
    y
}

/// `wᵀ · y`: (out×in)ᵀ · out → in.
pub fn matvec_t(w: &Mat, y: &[f64]) -> Vec<f64> {
    assert_eq!(w.rows, y.len(), "inner dimensions");
    let mut x = vec![0.0; w.cols];
    for o in 0..w.rows {
        let g = y[o];
        if g == 0.0 {
            continue;
        }
        let wr = w.row(o);
        for i in 0..w.cols {
            x[i] += g * wr[i];
        }
    }
    x
}

/// `g += a ⊗ b` (outer product accumulate into an out×in matrix).
pub fn outer_acc(g: &mut Mat, a: &[f64], b: &[f64]) {
    assert_eq!(g.rows, a.len());
    assert_eq!(g.cols, b.len());
    for (o, &av) in a.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        let gr = g.row_mut(o);
        for (i, &bv) in b.iter().enumerate() {
            gr[i] += av * bv;
        }
    }
}

pub fn add_assign(a: &mut [f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_shapes_and_values() {
        // x: 2×3, w: 2 outputs × 3 inputs.
        let x = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]);
        let w = Mat::from_rows(&[vec![1.0, 0.0, -1.0], vec![2.0, 1.0, 0.0]]);
        let y = matmul_nt(&x, &w);
        assert_eq!(y.rows, 2);
        assert_eq!(y.cols, 2);
        assert_eq!(y.row(0), &[-2.0, 4.0]); // (1−3, 2+2)
        assert_eq!(y.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn transpose_products_agree_with_direct_sum() {
        let a = Mat::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.5]]);
        let b = Mat::from_rows(&[vec![3.0, 1.0, 0.0], vec![-1.0, 2.0, 4.0]]);
        let y = matmul_tn(&a, &b);
        // y[o][i] = Σ_t a[t][o]·b[t][i]
        assert_eq!(y.at(0, 0), 1.0 * 3.0 + 2.0 * -1.0);
        assert_eq!(y.at(1, 2), -1.0 * 0.0 + 0.5 * 4.0);
    }

    #[test]
    fn vector_products_match_matrix_products() {
        let w = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let x = [1.0, -1.0];
        assert_eq!(matvec(&w, &x), vec![-1.0, -1.0, -1.0]);
        let y = [1.0, 0.0, 2.0];
        assert_eq!(matvec_t(&w, &y), vec![11.0, 14.0]);
    }

    #[test]
    fn outer_accumulates() {
        let mut g = Mat::zeros(2, 3);
        outer_acc(&mut g, &[1.0, 2.0], &[3.0, 0.0, -1.0]);
        outer_acc(&mut g, &[1.0, 0.0], &[1.0, 1.0, 1.0]);
        assert_eq!(g.row(0), &[4.0, 1.0, 0.0]);
        assert_eq!(g.row(1), &[6.0, 0.0, -2.0]);
    }
}
