// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense linear algebra used by the scorer.
//!
//! Design matrices here are tall and thin (a few hundred rows, rarely more
//! than thirty columns), so everything is column-major `Vec<f64>` with
//! Gram-Schmidt projections and a Cholesky factorization.

use serde::{Deserialize, Serialize};

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_columns(nrows: usize, columns: Vec<Vec<f64>>) -> Self {
        let ncols = columns.len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for col in columns {
            assert_eq!(col.len(), nrows, "column length mismatch");
            data.extend(col);
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.nrows.max(1)).take(self.ncols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (col, &c) in self.columns().zip(v) {
            axpy(c, col, &mut out);
        }
        out
    }

    /// `self' * self`, returned as a full symmetric matrix.
    pub fn gram(&self) -> Matrix {
        let q = self.ncols;
        let mut g = Matrix::zeros(q, q);
        for i in 0..q {
            for j in 0..=i {
                let v = dot(self.col(i), self.col(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin QR factorization by modified Gram-Schmidt with one reorthogonalization
/// pass. Columns that are numerically dependent on earlier ones are dropped
/// from the basis and reported in `dependent`.
#[derive(Clone, Debug)]
pub struct ThinQr {
    /// Orthonormal basis vectors, one per independent input column.
    pub q: Vec<Vec<f64>>,
    /// Upper-triangular factor over the independent columns (row-major, `rank x rank`).
    pub r: Vec<Vec<f64>>,
    pub dependent: Vec<usize>,
}

impl ThinQr {
    /// Relative tolerance on the residual norm of a column below which it is
    /// treated as linearly dependent.
    pub const RANK_TOL: f64 = 1e-10;

    pub fn new<'a, I>(columns: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut r_cols: Vec<Vec<f64>> = Vec::new();
        let mut dependent = Vec::new();
        for (j, col) in columns.into_iter().enumerate() {
            let original_norm = dot(col, col).sqrt();
            let mut v = col.to_vec();
            let mut coeffs = vec![0.0; q.len()];
            for _pass in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let c = dot(qi, &v);
                    coeffs[i] += c;
                    axpy(-c, qi, &mut v);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if original_norm == 0.0 || norm <= Self::RANK_TOL * original_norm {
                dependent.push(j);
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            coeffs.push(norm);
            q.push(v);
            r_cols.push(coeffs);
        }
        let rank = q.len();
        let mut r = vec![vec![0.0; rank]; rank];
        for (j, coeffs) in r_cols.iter().enumerate() {
            for (i, &c) in coeffs.iter().enumerate() {
                r[i][j] = c;
            }
        }
        Self { q, r, dependent }
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// Removes the span of the basis from `v` in place.
    pub fn project_out(&self, v: &mut [f64]) {
        for _pass in 0..2 {
            for qi in &self.q {
                let c = dot(qi, v);
                axpy(-c, qi, v);
            }
        }
    }

    /// Least-squares coefficients of `v` on the (full-rank) input columns.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let rank = self.rank();
        let qtv: Vec<f64> = self.q.iter().map(|qi| dot(qi, v)).collect();
        let mut x = vec![0.0; rank];
        for i in (0..rank).rev() {
            let s: f64 = (i + 1..rank).map(|j| self.r[i][j] * x[j]).sum();
            x[i] = (qtv[i] - s) / self.r[i][i];
        }
        x
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle, full storage
    l: Vec<f64>,
}

impl Cholesky {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn factor(a: &Matrix) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `log |A|`, accumulated from the diagonal of the factor.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.l[i * self.n + i].ln())
            .sum::<f64>()
    }

    /// Squared ratio of the largest to smallest pivot; a cheap lower bound on
    /// the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let diag = (0..self.n).map(|i| self.l[i * self.n + i]);
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
        (hi / lo).powi(2)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}
