//! QR factorization of the (transformed) working-set matrix, updated by Givens rotations.
//!
//! With `Q = L L'` and `v_i = L^{-1} a_i`, the working-set matrix `V = [v_i, i in W]` is kept as
//! `V = J[:, ..w] R` with `J` orthogonal (`n x n`) and `R` upper triangular (`w x w`). The
//! trailing columns `J[:, w..]` span the null space of `V'`.

use nalgebra::{DMatrix, DVector};

/// Relative size below which a new column is considered dependent on the working set.
const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct WorkingSetQr {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    w: usize,
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    (a / h, b / h, h)
}

impl WorkingSetQr {
    pub fn new(n: usize) -> Self {
        WorkingSetQr {
            j: DMatrix::identity(n, n),
            r: DMatrix::zeros(n, n),
            w: 0,
        }
    }

    pub fn clear(&mut self) {
        let n = self.j.nrows();
        self.j.fill_with_identity();
        self.r.fill(0.0);
        debug_assert_eq!(self.j.ncols(), n);
        self.w = 0;
    }

    pub fn size(&self) -> usize {
        self.w
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    /// `J' v`.
    pub fn rotate_in(&self, v: &DVector<f64>) -> DVector<f64> {
        self.j.tr_mul(v)
    }

    /// `J[:, range] * coeffs` accumulated into `out`.
    fn accumulate(&self, cols: std::ops::Range<usize>, coeffs: &[f64], out: &mut DVector<f64>) {
        for (k, &c) in cols.zip(coeffs) {
            if c != 0.0 {
                out.axpy(c, &self.j.column(k), 1.0);
            }
        }
    }

    /// Combine `J[:, ..w] head + J[:, w..] tail`.
    pub fn combine(&self, head: &[f64], tail: &[f64]) -> DVector<f64> {
        let n = self.n();
        let mut out = DVector::zeros(n);
        self.accumulate(0..self.w, head, &mut out);
        self.accumulate(self.w..n, tail, &mut out);
        out
    }

    /// Solve `R' a = b` (forward substitution).
    pub fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let w = self.w;
        let mut a = vec![0.0; w];
        for k in 0..w {
            let mut s = b[k];
            for i in 0..k {
                s -= self.r[(i, k)] * a[i];
            }
            a[k] = s / self.r[(k, k)];
        }
        a
    }

    /// Solve `R x = b` (back substitution).
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let w = self.w;
        let mut x = vec![0.0; w];
        for k in (0..w).rev() {
            let mut s = b[k];
            for i in (k + 1)..w {
                s -= self.r[(k, i)] * x[i];
            }
            x[k] = s / self.r[(k, k)];
        }
        x
    }

    /// Append column `v`. Returns `false` (and leaves the factor unchanged) if `v` is
    /// numerically in the span of the current columns.
    pub fn add(&mut self, v: &DVector<f64>) -> bool {
        let n = self.n();
        let w = self.w;
        if w >= n {
            return false;
        }
        let mut d = self.rotate_in(v);
        let tail_norm = d.rows(w, n - w).norm();
        if tail_norm <= DEPENDENCE_TOL * v.norm().max(f64::MIN_POSITIVE) {
            return false;
        }
        for i in ((w + 1)..n).rev() {
            if d[i] == 0.0 {
                continue;
            }
            let (c, s, h) = givens(d[i - 1], d[i]);
            d[i - 1] = h;
            d[i] = 0.0;
            self.rotate_columns(i - 1, i, c, s);
        }
        for i in 0..=w {
            self.r[(i, w)] = d[i];
        }
        self.w += 1;
        true
    }

    /// Remove the `k`-th working column.
    pub fn remove(&mut self, k: usize) {
        let w = self.w;
        assert!(k < w);
        for col in k..(w - 1) {
            for i in 0..=(col + 1) {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..w {
            self.r[(i, w - 1)] = 0.0;
        }
        // R is now upper Hessenberg in columns k..w-1.
        for jj in k..(w - 1) {
            let a = self.r[(jj, jj)];
            let b = self.r[(jj + 1, jj)];
            if b == 0.0 {
                continue;
            }
            let (c, s, h) = givens(a, b);
            self.r[(jj, jj)] = h;
            self.r[(jj + 1, jj)] = 0.0;
            for col in (jj + 1)..(w - 1) {
                let top = self.r[(jj, col)];
                let bot = self.r[(jj + 1, col)];
                self.r[(jj, col)] = c * top + s * bot;
                self.r[(jj + 1, col)] = -s * top + c * bot;
            }
            self.rotate_columns(jj, jj + 1, c, s);
        }
        self.w -= 1;
    }

    fn rotate_columns(&mut self, p: usize, q: usize, c: f64, s: f64) {
        for row in 0..self.j.nrows() {
            let a = self.j[(row, p)];
            let b = self.j[(row, q)];
            self.j[(row, p)] = c * a + s * b;
            self.j[(row, q)] = -s * a + c * b;
        }
    }

    #[cfg(test)]
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.j.columns(0, self.w) * self.r.view((0, 0), (self.w, self.w))
    }
}
