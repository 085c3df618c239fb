//! Gradient-enhanced Gaussian process with a condition-number-bounded
//! covariance.
//!
//! Observations are stacked in block layout: the `n_x` function values come
//! first, followed by one block of `n_x` partial derivatives per direction.
//! Index `(point i, block b)` maps to `b * n_x + i`, with block 0 holding the
//! values and block `d + 1` holding `∂f/∂x_d`.
//!
//! The covariance is
//!
//! ```text
//! Σg = σ_K² (Kg + η W) + Vg,   W = P²,   P = sqrt(diag(Kg + Vg/σ_K²))
//! ```
//!
//! and only the preconditioned matrix `K̇g + ηI = P⁻¹(Kg + Vg/σ_K²)P⁻¹ + ηI`
//! is ever factorized. The nugget is sized from the largest absolute row sum
//! of `K̇g`, which caps the condition number of the factorized matrix at
//! `cond_max` for any set of points, duplicated or not.

use crate::error::{GeboError, Result};
use crate::kernels::{profile, KernelKind};
use crate::linalg::{dot, Cholesky, SquareMatrix};

/// Default maximum condition number of the preconditioned covariance.
pub const DEFAULT_COND_MAX: f64 = 1e10;

/// Tolerance on the variance ratio below zero that is treated as roundoff.
pub const NEGATIVE_RATIO_TOL: f64 = 1e-10;

/// Evaluation points with values and gradients in block layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    points: Vec<Vec<f64>>,
    stacked: Vec<f64>,
    n_d: usize,
}

impl DataSet {
    /// Builds a data set from per-point values and gradients.
    pub fn new(points: Vec<Vec<f64>>, values: &[f64], gradients: &[Vec<f64>]) -> Result<Self> {
        let n_x = points.len();
        if n_x == 0 {
            return Err(GeboError::Empty("data set needs at least one point".into()));
        }
        let n_d = points[0].len();
        if values.len() != n_x {
            return Err(GeboError::DimensionMismatch {
                expected: n_x,
                got: values.len(),
            });
        }
        if gradients.len() != n_x {
            return Err(GeboError::DimensionMismatch {
                expected: n_x,
                got: gradients.len(),
            });
        }
        for (p, g) in points.iter().zip(gradients) {
            if p.len() != n_d || g.len() != n_d {
                return Err(GeboError::DimensionMismatch {
                    expected: n_d,
                    got: if p.len() != n_d { p.len() } else { g.len() },
                });
            }
        }
        let mut stacked = Vec::with_capacity(n_x * (n_d + 1));
        stacked.extend_from_slice(values);
        for d in 0..n_d {
            stacked.extend(gradients.iter().map(|g| g[d]));
        }
        Ok(Self { points, stacked, n_d })
    }

    /// Builds a data set from an already stacked `[f; ∂f/∂x_1; …]` vector.
    pub fn from_stacked(points: Vec<Vec<f64>>, stacked: Vec<f64>) -> Result<Self> {
        let n_x = points.len();
        if n_x == 0 {
            return Err(GeboError::Empty("data set needs at least one point".into()));
        }
        let n_d = points[0].len();
        if points.iter().any(|p| p.len() != n_d) {
            return Err(GeboError::InvalidParameter("points have differing dimensions".into()));
        }
        if stacked.len() != n_x * (n_d + 1) {
            return Err(GeboError::DimensionMismatch {
                expected: n_x * (n_d + 1),
                got: stacked.len(),
            });
        }
        Ok(Self { points, stacked, n_d })
    }

    pub fn n_x(&self) -> usize {
        self.points.len()
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    /// Size of the gradient-enhanced covariance, `n_x (n_d + 1)`.
    pub fn n_obs(&self) -> usize {
        self.n_x() * (self.n_d + 1)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn stacked(&self) -> &[f64] {
        &self.stacked
    }

    pub fn values(&self) -> &[f64] {
        &self.stacked[..self.n_x()]
    }

    pub fn gradient(&self, i: usize) -> Vec<f64> {
        let n_x = self.n_x();
        (0..self.n_d).map(|d| self.stacked[(d + 1) * n_x + i]).collect()
    }

    /// The indicator `1_mod = [1_{n_x}; 0_{n_x n_d}]`.
    pub fn mean_indicator(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_obs()];
        v[..self.n_x()].iter_mut().for_each(|x| *x = 1.0);
        v
    }

    /// Returns a copy with rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let points = perm.iter().map(|&i| self.points[i].clone()).collect();
        let values: Vec<f64> = perm.iter().map(|&i| self.values()[i]).collect();
        let grads: Vec<Vec<f64>> = perm.iter().map(|&i| self.gradient(i)).collect();
        Self::new(points, &values, &grads).expect("permutation keeps shapes")
    }
}

/// Hyperparameters of the gradient-enhanced GP.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters {
    /// Length-scale rates `γ_d > 0`.
    pub gamma: Vec<f64>,
    /// Signal standard deviation `σ_K`.
    pub sigma_k: f64,
    /// Constant prior mean.
    pub beta: f64,
    /// Estimated noise standard deviation of function values.
    pub sigma_f: f64,
    /// Estimated noise standard deviation of gradient entries.
    pub sigma_grad: f64,
    /// Rational quadratic shape parameter, when that kernel is used.
    pub alpha: Option<f64>,
}

impl Hyperparameters {
    pub fn noise_free(gamma: Vec<f64>, sigma_k: f64, beta: f64) -> Self {
        Self {
            gamma,
            sigma_k,
            beta,
            sigma_f: 0.0,
            sigma_grad: 0.0,
            alpha: None,
        }
    }

    pub fn validate(&self, n_d: usize) -> Result<()> {
        if self.gamma.len() != n_d {
            return Err(GeboError::DimensionMismatch {
                expected: n_d,
                got: self.gamma.len(),
            });
        }
        if self.gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(GeboError::InvalidParameter(format!("gamma must be positive: {:?}", self.gamma)));
        }
        for (name, v) in [("sigma_k", self.sigma_k), ("sigma_f", self.sigma_f), ("sigma_grad", self.sigma_grad)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(GeboError::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !self.beta.is_finite() {
            return Err(GeboError::InvalidParameter("beta must be finite".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(GeboError::InvalidParameter(format!("alpha must be positive, got {a}")));
            }
        }
        Ok(())
    }

    pub fn is_noisy(&self) -> bool {
        self.sigma_f > 0.0 || self.sigma_grad > 0.0
    }

    /// Kernel with this set's α substituted when it is a rational quadratic.
    pub fn kernel(&self, kind: KernelKind) -> KernelKind {
        match self.alpha {
            Some(a) => kind.with_alpha(a),
            None => kind,
        }
    }
}

/// Gradient-enhanced kernel matrix `Kg` in block layout.
pub fn build_grad_kernel_matrix(points: &[Vec<f64>], kind: KernelKind, gamma: &[f64]) -> Result<SquareMatrix> {
    let n_x = points.len();
    if n_x == 0 {
        return Err(GeboError::Empty("no points".into()));
    }
    let n_d = gamma.len();
    if let Some(p) = points.iter().find(|p| p.len() != n_d) {
        return Err(GeboError::DimensionMismatch {
            expected: n_d,
            got: p.len(),
        });
    }
    kind.validate()?;
    if gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(GeboError::InvalidParameter("gamma must be positive".into()));
    }
    Ok(assemble_kg(points, kind, gamma))
}

pub(crate) fn assemble_kg(points: &[Vec<f64>], kind: KernelKind, gamma: &[f64]) -> SquareMatrix {
    let n_x = points.len();
    let n_d = gamma.len();
    let n = n_x * (n_d + 1);
    let mut kg = SquareMatrix::zeros(n);
    let g2: Vec<f64> = gamma.iter().map(|g| g * g).collect();
    let mut a = vec![0.0; n_d];
    for i in 0..n_x {
        for j in 0..=i {
            let mut s = 0.0;
            for d in 0..n_d {
                let r = gamma[d] * (points[i][d] - points[j][d]);
                a[d] = gamma[d] * r;
                s += r * r;
            }
            let p = profile(kind, s);
            // (x_i, x_j) block entries; the (j, i) block is its transpose
            let kij = p.k;
            kg[(i, j)] = kij;
            kg[(j, i)] = kij;
            for e in 0..n_d {
                // ∂k/∂y_e at (x_i, x_j) = -2k' a_e ; ∂k/∂x_e at (x_i, x_j) = 2k' a_e
                let dy = -2.0 * p.d1 * a[e];
                let col = (e + 1) * n_x;
                kg[(i, col + j)] = dy;
                kg[(col + j, i)] = dy;
                kg[(col + i, j)] = -dy;
                kg[(j, col + i)] = -dy;
            }
            for d in 0..n_d {
                let rd = (d + 1) * n_x;
                for e in 0..n_d {
                    let ce = (e + 1) * n_x;
                    let mut h = -4.0 * p.d2 * a[d] * a[e];
                    if d == e {
                        h -= 2.0 * p.d1 * g2[d];
                    }
                    kg[(rd + i, ce + j)] = h;
                    kg[(ce + j, rd + i)] = h;
                }
            }
        }
    }
    kg
}

/// Relative widening of the nugget. With two coincident points the bound
/// `κ ≤ cond_max` is attained exactly, so without slack roundoff decides
/// which side of it the factored matrix lands on.
pub const NUGGET_MARGIN: f64 = 1e-4;

pub(crate) fn nugget_scale(cond_max: f64) -> f64 {
    (1.0 + NUGGET_MARGIN) / (cond_max - 1.0)
}

/// Result of diagonal preconditioning and nugget selection.
#[derive(Clone, Debug)]
pub struct Preconditioned {
    /// `sqrt(diag(input))`.
    pub p_diag: Vec<f64>,
    /// Unit-diagonal `P⁻¹ · input · P⁻¹`.
    pub kdot: SquareMatrix,
    /// `max_i Σ_j |K̇g_ij| / (cond_max - 1)`, widened by [`NUGGET_MARGIN`].
    pub eta: f64,
    /// Row achieving the largest absolute row sum.
    pub argmax_row: usize,
}

/// Preconditions `Kg + Vg/σ_K²` to unit diagonal and sizes the nugget so that
/// `κ(K̇g + ηI) ≤ cond_max`.
pub fn precondition_and_nugget(input: &SquareMatrix, cond_max: f64) -> Result<Preconditioned> {
    if !(cond_max > 1.0) {
        return Err(GeboError::InvalidParameter(format!("cond_max must exceed 1, got {cond_max}")));
    }
    let n = input.size();
    let mut p_diag = Vec::with_capacity(n);
    for i in 0..n {
        let v = input[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(GeboError::NonPositiveDiagonal { index: i, value: v });
        }
        p_diag.push(v.sqrt());
    }
    let mut kdot = SquareMatrix::zeros(n);
    let (mut best, mut argmax_row) = (f64::NEG_INFINITY, 0);
    for i in 0..n {
        let pi = p_diag[i];
        let row_in = input.row(i);
        let row = kdot.row_mut(i);
        let mut sum = 0.0;
        for j in 0..n {
            let v = if i == j { 1.0 } else { row_in[j] / (pi * p_diag[j]) };
            row[j] = v;
            sum += v.abs();
        }
        if sum > best {
            best = sum;
            argmax_row = i;
        }
    }
    // symmetrize against roundoff in the scaling
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (kdot[(i, j)] + kdot[(j, i)]);
            kdot[(i, j)] = v;
            kdot[(j, i)] = v;
        }
    }
    Ok(Preconditioned {
        p_diag,
        kdot,
        eta: best * nugget_scale(cond_max),
        argmax_row,
    })
}

/// `Kg + Vg / σ_K²`, the matrix that is preconditioned.
pub(crate) fn scaled_covariance(data: &DataSet, hp: &Hyperparameters, kind: KernelKind) -> Result<SquareMatrix> {
    let mut a = assemble_kg(data.points(), hp.kernel(kind), &hp.gamma);
    if hp.is_noisy() {
        if !(hp.sigma_k > 0.0) {
            return Err(GeboError::InvalidParameter(
                "sigma_k must be positive when noise hyperparameters are nonzero".into(),
            ));
        }
        let s2 = hp.sigma_k * hp.sigma_k;
        let n_x = data.n_x();
        let vf = hp.sigma_f * hp.sigma_f / s2;
        let vg = hp.sigma_grad * hp.sigma_grad / s2;
        for i in 0..a.size() {
            a[(i, i)] += if i < n_x { vf } else { vg };
        }
    }
    Ok(a)
}

/// Factorized `M = Kg + Vg/σ_K² + ηW = P (K̇g + ηI) P`, so that `Σg = σ_K² M`.
#[derive(Clone, Debug)]
pub struct ConditionedCovariance {
    pub(crate) p_diag: Vec<f64>,
    pub(crate) eta: f64,
    pub(crate) chol: Cholesky,
    pub(crate) argmax_row: usize,
    pub(crate) kdot: SquareMatrix,
}

impl ConditionedCovariance {
    pub fn build(data: &DataSet, hp: &Hyperparameters, kind: KernelKind, cond_max: f64) -> Result<Self> {
        let a = scaled_covariance(data, hp, kind)?;
        Self::from_scaled(&a, cond_max)
    }

    pub(crate) fn from_scaled(a: &SquareMatrix, cond_max: f64) -> Result<Self> {
        let pre = precondition_and_nugget(a, cond_max)?;
        let mut m = pre.kdot.clone();
        for i in 0..m.size() {
            m[(i, i)] += pre.eta;
        }
        let chol = Cholesky::factor_or_err(&m, pre.eta)?;
        Ok(Self {
            p_diag: pre.p_diag,
            eta: pre.eta,
            chol,
            argmax_row: pre.argmax_row,
            kdot: pre.kdot,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p_diag(&self) -> &[f64] {
        &self.p_diag
    }

    /// Lower factor of the preconditioned matrix `K̇g + ηI`.
    pub fn factor(&self) -> &SquareMatrix {
        self.chol.l()
    }

    /// `M⁻¹ b`, routed through `P⁻¹` and the preconditioned factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = b.iter().zip(&self.p_diag).map(|(v, p)| v / p).collect();
        self.chol.forward_in_place(&mut y);
        self.chol.backward_in_place(&mut y);
        y.iter_mut().zip(&self.p_diag).for_each(|(v, p)| *v /= p);
        y
    }

    /// `L̇⁻¹ P⁻¹ b`, whose squared norm is `bᵀ M⁻¹ b`.
    pub fn half_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = b.iter().zip(&self.p_diag).map(|(v, p)| v / p).collect();
        self.chol.forward_in_place(&mut y);
        y
    }

    /// `ln det M = 2 Σ ln P_ii + 2 Σ ln L̇_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.p_diag.iter().map(|p| p.ln()).sum::<f64>() + self.chol.log_det()
    }

    /// Explicit `M⁻¹`.
    pub fn inverse(&self) -> SquareMatrix {
        let mut inv = self.chol.inverse();
        let n = inv.size();
        for i in 0..n {
            let pi = self.p_diag[i];
            let row = inv.row_mut(i);
            for j in 0..n {
                row[j] /= pi * self.p_diag[j];
            }
        }
        inv
    }

    /// Reconstructs `M = P L̇ L̇ᵀ P`.
    pub fn reconstruct(&self) -> SquareMatrix {
        let l = self.chol.l();
        let llt = l.matmul(&l.transpose());
        SquareMatrix::from_fn(llt.size(), |i, j| self.p_diag[i] * llt[(i, j)] * self.p_diag[j])
    }
}

/// Posterior quantities at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorPoint {
    pub mean: f64,
    pub variance: f64,
    /// `σ²/σ_K² ∈ [0, 1]`.
    pub ratio: f64,
    pub mean_grad: Vec<f64>,
    pub ratio_grad: Vec<f64>,
}

/// Immutable fitted surrogate.
#[derive(Clone, Debug)]
pub struct FittedSurrogate {
    data: DataSet,
    hp: Hyperparameters,
    kind: KernelKind,
    cov: ConditionedCovariance,
    /// `M⁻¹ (f∇ - 1_mod β)`
    weights: Vec<f64>,
}

/// Fits the surrogate with the given hyperparameters (β and σ_K taken as is).
pub fn fit_surrogate(data: &DataSet, hp: &Hyperparameters, kind: KernelKind, cond_max: f64) -> Result<FittedSurrogate> {
    hp.validate(data.n_d())?;
    let cov = ConditionedCovariance::build(data, hp, kind, cond_max)?;
    let resid = residual(data, hp.beta);
    let weights = cov.solve(&resid);
    Ok(FittedSurrogate {
        data: data.clone(),
        hp: hp.clone(),
        kind: hp.kernel(kind),
        cov,
        weights,
    })
}

pub(crate) fn residual(data: &DataSet, beta: f64) -> Vec<f64> {
    let n_x = data.n_x();
    data.stacked()
        .iter()
        .enumerate()
        .map(|(i, v)| if i < n_x { v - beta } else { *v })
        .collect()
}

impl FittedSurrogate {
    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    pub fn kernel(&self) -> KernelKind {
        self.kind
    }

    pub fn covariance(&self) -> &ConditionedCovariance {
        &self.cov
    }

    pub fn nugget(&self) -> f64 {
        self.cov.eta
    }

    pub fn n_d(&self) -> usize {
        self.data.n_d()
    }

    /// Full `Σg = σ_K² M` reconstructed from the factor.
    pub fn reconstructed_sigma(&self) -> SquareMatrix {
        let s2 = self.hp.sigma_k * self.hp.sigma_k;
        let m = self.cov.reconstruct();
        SquareMatrix::from_fn(m.size(), |i, j| s2 * m[(i, j)])
    }

    /// Directly assembled `Σg = σ_K²(Kg + ηW) + Vg`.
    pub fn assembled_sigma(&self) -> SquareMatrix {
        let kg = assemble_kg(self.data.points(), self.kind, &self.hp.gamma);
        let s2 = self.hp.sigma_k * self.hp.sigma_k;
        let n_x = self.data.n_x();
        let mut sigma = SquareMatrix::from_fn(kg.size(), |i, j| s2 * kg[(i, j)]);
        for i in 0..kg.size() {
            let w = self.cov.p_diag[i] * self.cov.p_diag[i];
            let noise = if i < n_x { self.hp.sigma_f } else { self.hp.sigma_grad };
            sigma[(i, i)] += s2 * self.cov.eta * w + noise * noise;
        }
        sigma
    }

    /// Kernel vector `k∇(X, x')` and, optionally, its Jacobian in `x'`
    /// (row-major `n_obs × n_d`).
    fn kernel_vector(&self, x: &[f64], with_jacobian: bool) -> (Vec<f64>, Vec<f64>) {
        let n_x = self.data.n_x();
        let n_d = self.data.n_d();
        let gamma = &self.hp.gamma;
        let n = n_x * (n_d + 1);
        let mut kv = vec![0.0; n];
        let mut jac = if with_jacobian { vec![0.0; n * n_d] } else { Vec::new() };
        let mut a = vec![0.0; n_d];
        for (i, p) in self.data.points().iter().enumerate() {
            let mut s = 0.0;
            for d in 0..n_d {
                let r = gamma[d] * (p[d] - x[d]);
                a[d] = gamma[d] * r;
                s += r * r;
            }
            let pr = profile(self.kind, s);
            if pr.k == 0.0 && pr.d1 == 0.0 {
                continue;
            }
            kv[i] = pr.k;
            for d in 0..n_d {
                kv[(d + 1) * n_x + i] = 2.0 * pr.d1 * a[d];
            }
            if with_jacobian {
                for e in 0..n_d {
                    jac[i * n_d + e] = -2.0 * pr.d1 * a[e];
                }
                for d in 0..n_d {
                    let row = ((d + 1) * n_x + i) * n_d;
                    for e in 0..n_d {
                        let mut h = -4.0 * pr.d2 * a[d] * a[e];
                        if d == e {
                            h -= 2.0 * pr.d1 * gamma[d] * gamma[d];
                        }
                        jac[row + e] = h;
                    }
                }
            }
        }
        (kv, jac)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_d() {
            return Err(GeboError::DimensionMismatch {
                expected: self.n_d(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `μ(x') = β + σ_K² k∇ᵀ Σg⁻¹ (f∇ - m∇)`.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let (kv, _) = self.kernel_vector(x, false);
        Ok(self.hp.beta + dot(&kv, &self.weights))
    }

    pub fn posterior_mean_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x, true)?.mean_grad)
    }

    /// `σ²(x') = σ_K² (1 - k∇ᵀ M⁻¹ k∇)`.
    pub fn posterior_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.sigma_k2() * self.variance_ratio(x)?)
    }

    pub fn variance_ratio(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let (kv, _) = self.kernel_vector(x, false);
        let u = self.cov.half_solve(&kv);
        clamp_ratio(1.0 - dot(&u, &u))
    }

    pub fn sigma_k2(&self) -> f64 {
        self.hp.sigma_k * self.hp.sigma_k
    }

    /// Mean, variance and (optionally) their gradients in one pass.
    pub fn evaluate(&self, x: &[f64], with_grad: bool) -> Result<PosteriorPoint> {
        self.check_dim(x)?;
        let n_d = self.n_d();
        let (kv, jac) = self.kernel_vector(x, with_grad);
        let mean = self.hp.beta + dot(&kv, &self.weights);
        let mut v = self.cov.half_solve(&kv);
        let ratio = clamp_ratio(1.0 - dot(&v, &v))?;
        let (mut mean_grad, mut ratio_grad) = (Vec::new(), Vec::new());
        if with_grad {
            self.cov.chol.backward_in_place(&mut v);
            v.iter_mut().zip(&self.cov.p_diag).for_each(|(t, p)| *t /= p);
            mean_grad = vec![0.0; n_d];
            ratio_grad = vec![0.0; n_d];
            for (row, (w, vv)) in self.weights.iter().zip(&v).enumerate() {
                let jr = &jac[row * n_d..(row + 1) * n_d];
                for e in 0..n_d {
                    mean_grad[e] += jr[e] * w;
                    ratio_grad[e] -= 2.0 * jr[e] * vv;
                }
            }
        }
        Ok(PosteriorPoint {
            mean,
            variance: self.sigma_k2() * ratio,
            ratio,
            mean_grad,
            ratio_grad,
        })
    }
}

fn clamp_ratio(r: f64) -> Result<f64> {
    if !r.is_finite() || r < -NEGATIVE_RATIO_TOL || r > 1.0 + NEGATIVE_RATIO_TOL {
        return Err(GeboError::VarianceOutOfRange(r));
    }
    Ok(r.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_point() -> DataSet {
        DataSet::new(vec![vec![0.2, -0.1]], &[1.5], &[vec![0.3, -0.7]]).unwrap()
    }

    #[test]
    fn single_point_kernel_matrix() {
        let kg = build_grad_kernel_matrix(&[vec![0.0, 0.0]], KernelKind::Gaussian, &[2.0, 3.0]).unwrap();
        let expected = SquareMatrix::from_row_major(3, vec![1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 9.0]);
        assert_eq!(kg, expected);
    }

    #[test]
    fn kernel_matrix_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [KernelKind::Gaussian, KernelKind::MaternPrinted, KernelKind::RationalQuadratic { alpha: 2.0 }] {
            let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let kg = build_grad_kernel_matrix(&pts, kind, &[0.5, 1.5, 2.5]).unwrap();
            assert_eq!(kg, kg.transpose());
        }
    }

    #[test]
    fn coincident_points_duplicate_rows() {
        let kg = build_grad_kernel_matrix(&[vec![0.4], vec![0.4]], KernelKind::Gaussian, &[1.0]).unwrap();
        assert_eq!(kg.size(), 4);
        assert_eq!(kg.row(0), kg.row(1));
        assert_eq!(kg.row(2), kg.row(3));
        assert!(Cholesky::factor(&kg).is_err());
    }

    #[test]
    fn block_entries_match_kernel_derivatives() {
        use crate::kernels::{kernel_cross_hessian, kernel_first_derivs, kernel_value};
        let pts = vec![vec![0.1, 0.5], vec![-0.3, 0.2], vec![0.7, -0.4]];
        let g = [0.8, 1.7];
        let kind = KernelKind::MaternPrinted;
        let kg = build_grad_kernel_matrix(&pts, kind, &g).unwrap();
        let n_x = 3;
        for i in 0..n_x {
            for j in 0..n_x {
                assert!((kg[(i, j)] - kernel_value(kind, &pts[i], &pts[j], &g).unwrap()).abs() < 1e-15);
                let (dx, dy) = kernel_first_derivs(kind, &pts[i], &pts[j], &g).unwrap();
                let h = kernel_cross_hessian(kind, &pts[i], &pts[j], &g).unwrap();
                for d in 0..2 {
                    assert!((kg[(i, (d + 1) * n_x + j)] - dy[d]).abs() < 1e-15);
                    assert!((kg[((d + 1) * n_x + i, j)] - dx[d]).abs() < 1e-15);
                    for e in 0..2 {
                        assert!((kg[((d + 1) * n_x + i, (e + 1) * n_x + j)] - h[d][e]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn preconditioning_single_point() {
        let kg = build_grad_kernel_matrix(&[vec![0.0, 0.0]], KernelKind::Gaussian, &[2.0, 3.0]).unwrap();
        let pre = precondition_and_nugget(&kg, 1e10).unwrap();
        assert_eq!(pre.p_diag, vec![1.0, 2.0, 3.0]);
        assert_eq!(pre.kdot, SquareMatrix::identity(3));
        assert!((pre.eta - (1.0 + NUGGET_MARGIN) / (1e10 - 1.0)).abs() < 1e-25);
        assert!((pre.eta / 1.0000000001e-10 - 1.0).abs() <= NUGGET_MARGIN * (1.0 + 1e-12));
    }

    #[test]
    fn preconditioned_matrix_has_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let kg = build_grad_kernel_matrix(&pts, KernelKind::Gaussian, &[0.3, 4.0]).unwrap();
        let pre = precondition_and_nugget(&kg, 1e8).unwrap();
        assert!(pre.kdot.diagonal().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn coincident_points_condition_bound() {
        let kg = build_grad_kernel_matrix(&[vec![0.4], vec![0.4]], KernelKind::Gaussian, &[1.0]).unwrap();
        let pre = precondition_and_nugget(&kg, 1e10).unwrap();
        let mut m = pre.kdot.clone();
        for i in 0..4 {
            m[(i, i)] += pre.eta;
        }
        let eig = m.to_dmatrix().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(lo > 0.0);
        assert!(hi / lo <= 1e10 * (1.0 + 1e-6));
        assert!(Cholesky::factor(&m).is_ok());
    }

    #[test]
    fn nonpositive_diagonal_rejected() {
        let m = SquareMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(precondition_and_nugget(&m, 1e10), Err(GeboError::NonPositiveDiagonal { index: 1, .. })));
        assert!(precondition_and_nugget(&SquareMatrix::identity(2), 1.0).is_err());
    }

    #[test]
    fn single_point_posterior_reproduces_data() {
        let data = single_point();
        let hp = Hyperparameters::noise_free(vec![1.0, 2.0], 1.3, 0.5);
        let s = fit_surrogate(&data, &hp, KernelKind::Gaussian, 1e10).unwrap();
        let x = &data.points()[0];
        let p = s.evaluate(x, true).unwrap();
        let eta = s.nugget();
        assert!((p.mean - 1.5).abs() <= 10.0 * eta * (1.0 + 1.5));
        assert!((p.mean_grad[0] - 0.3).abs() < 1e-8 && (p.mean_grad[1] + 0.7).abs() < 1e-8);
        assert!(p.ratio <= 10.0 * eta);
    }

    #[test]
    fn gradient_noise_adds_to_gradient_diagonal() {
        let data = DataSet::new(vec![vec![0.0], vec![0.5]], &[1.0, 2.0], &[vec![0.1], vec![0.2]]).unwrap();
        let mut hp = Hyperparameters::noise_free(vec![1.5], 1.0, 0.0);
        let a0 = scaled_covariance(&data, &hp, KernelKind::Gaussian).unwrap();
        hp.sigma_grad = 1e-2;
        let a1 = scaled_covariance(&data, &hp, KernelKind::Gaussian).unwrap();
        for i in 0..4 {
            let expected = if i < 2 { 0.0 } else { 1e-4 };
            assert!((a1[(i, i)] - a0[(i, i)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn far_from_data_reverts_to_prior() {
        let data = single_point();
        let hp = Hyperparameters::noise_free(vec![1.0, 1.0], 2.0, -0.25);
        let s = fit_surrogate(&data, &hp, KernelKind::Gaussian, 1e10).unwrap();
        let far = [60.0, 0.0];
        assert!((s.posterior_mean(&far).unwrap() + 0.25).abs() < 1e-10);
        assert!((s.variance_ratio(&far).unwrap() - 1.0).abs() < 1e-10);
        assert!((s.posterior_variance(&far).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_matches_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p[0] * p[0] + p[1]).collect();
        let grads: Vec<Vec<f64>> = pts.iter().map(|p| vec![2.0 * p[0], 1.0]).collect();
        let data = DataSet::new(pts, &vals, &grads).unwrap();
        let hp = Hyperparameters {
            gamma: vec![0.9, 2.1],
            sigma_k: 1.7,
            beta: 0.2,
            sigma_f: 1e-3,
            sigma_grad: 1e-2,
            alpha: None,
        };
        let s = fit_surrogate(&data, &hp, KernelKind::Gaussian, 1e10).unwrap();
        let a = s.assembled_sigma();
        let b = s.reconstructed_sigma();
        let diff = SquareMatrix::from_fn(a.size(), |i, j| a[(i, j)] - b[(i, j)]);
        assert!(diff.frobenius_norm() <= 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn wrong_dimension_rejected() {
        let s = fit_surrogate(&single_point(), &Hyperparameters::noise_free(vec![1.0, 1.0], 1.0, 0.0), KernelKind::Gaussian, 1e10)
            .unwrap();
        assert!(s.posterior_mean(&[0.0]).is_err());
        assert!(DataSet::new(vec![], &[], &[]).is_err());
        assert!(fit_surrogate(&single_point(), &Hyperparameters::noise_free(vec![1.0], 1.0, 0.0), KernelKind::Gaussian, 1e10).is_err());
    }
}
