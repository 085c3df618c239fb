//! Small dense linear-algebra kernels on row-major square matrices.
//!
//! Factorization and inversion go through `faer`; triangular solves and the
//! rest stay on the row-major layout used by the covariance assembly.

use faer::linalg::cholesky::llt::factor::LltError;
use faer::linalg::solvers::{DenseSolveCore, Llt};
use faer::{Mat, Side};

use crate::error::{GeboError, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data has wrong length");
        Self { n, data }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a != 0.0 {
                    axpy(a, other.row(k), out.row_mut(i));
                }
            }
        }
        out
    }

    /// Converts to an `nalgebra` matrix (used for eigen-decompositions).
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: SquareMatrix,
    dense: Llt<f64>,
}

/// Reason a factorization stopped: index of the failing pivot.
#[derive(Clone, Copy, Debug)]
pub struct PivotFailure {
    pub pivot: usize,
}

impl Cholesky {
    /// Factorizes a symmetric positive definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn factor(a: &SquareMatrix) -> std::result::Result<Self, PivotFailure> {
        let n = a.size();
        let m = Mat::<f64>::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { 0.0 });
        let dense = m.llt(Side::Lower).map_err(|e| match e {
            LltError::NonPositivePivot { index } => PivotFailure { pivot: index },
        })?;
        let lf = dense.L();
        let l = SquareMatrix::from_fn(n, |i, j| if i >= j { lf[(i, j)] } else { 0.0 });
        if (0..n).any(|i| !l[(i, i)].is_finite()) {
            let pivot = (0..n).find(|&i| !l[(i, i)].is_finite()).unwrap_or(0);
            return Err(PivotFailure { pivot });
        }
        Ok(Self { l, dense })
    }

    pub fn factor_or_err(a: &SquareMatrix, nugget: f64) -> Result<Self> {
        Self::factor(a).map_err(|p| GeboError::Factorization {
            pivot: p.pivot,
            size: a.size(),
            value: a[(p.pivot.min(a.size().saturating_sub(1)), p.pivot.min(a.size().saturating_sub(1)))],
            nugget,
            max_abs: a.max_abs(),
        })
    }

    pub fn l(&self) -> &SquareMatrix {
        &self.l
    }

    pub fn size(&self) -> usize {
        self.l.size()
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.size();
        for i in 0..n {
            let s = b[i] - dot(&self.l.row(i)[..i], &b[..i]);
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.size();
        for i in (0..n).rev() {
            let xi = y[i] / self.l[(i, i)];
            y[i] = xi;
            // column i of Lᵀ above the diagonal is row i of L
            let row = &self.l.row(i)[..i];
            for (yk, lik) in y[..i].iter_mut().zip(row) {
                *yk -= lik * xi;
            }
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.size()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Explicit inverse `A⁻¹ = L⁻ᵀ L⁻¹` (full symmetric matrix).
    pub fn inverse(&self) -> SquareMatrix {
        let inv = self.dense.inverse();
        let n = self.size();
        let mut out = SquareMatrix::from_fn(n, |i, j| inv[(i, j)]);
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// Solves a small dense linear system by Gaussian elimination with partial
/// pivoting. Returns `None` for a singular matrix.
pub fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (x[r] - s) / m[r][r];
    }
    Some(x)
}
