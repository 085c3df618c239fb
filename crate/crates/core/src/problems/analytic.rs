//! Quadratic, bowl and Rosenbrock functions, each with minimum 0 at `x = 1`.

use crate::error::{GeboError, Result};
use crate::linalg::SquareMatrix;
use crate::problems::{Problem, Sample};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticKind {
    Quadratic,
    Bowl,
    Rosenbrock { a: f64 },
}

/// Banded SPD matrix `A_ij = e^{-(i-j)²/2} / 10` shared by the quadratic and
/// bowl functions.
pub fn coupling_matrix(n_d: usize) -> SquareMatrix {
    SquareMatrix::from_fn(n_d, |i, j| {
        let d = i as f64 - j as f64;
        0.1 * (-0.5 * d * d).exp()
    })
}

#[derive(Clone, Debug)]
pub struct AnalyticProblem {
    kind: AnalyticKind,
    coupling: SquareMatrix,
}

impl AnalyticProblem {
    pub fn new(kind: AnalyticKind, n_d: usize) -> Result<Self> {
        if n_d == 0 {
            return Err(GeboError::Config("dimension must be at least 1".into()));
        }
        if let AnalyticKind::Rosenbrock { a } = kind {
            if n_d < 2 || !(a > 0.0) {
                return Err(GeboError::Config(format!("Rosenbrock needs n_d >= 2 and a > 0, got {n_d}, {a}")));
            }
        }
        Ok(Self {
            kind,
            coupling: coupling_matrix(n_d),
        })
    }

    pub fn kind(&self) -> AnalyticKind {
        self.kind
    }

    /// Value and gradient at `x`.
    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self.kind {
            AnalyticKind::Quadratic => quadratic(&self.coupling, x),
            AnalyticKind::Bowl => bowl(&self.coupling, x),
            AnalyticKind::Rosenbrock { a } => rosenbrock(x, a),
        }
    }
}

impl Problem for AnalyticProblem {
    fn dim(&self) -> usize {
        self.coupling.size()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Sample> {
        if x.len() != self.dim() {
            return Err(GeboError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let (value, gradient) = self.value_grad(x);
        Ok(Sample {
            value,
            gradient,
            true_gradient: None,
        })
    }
}

/// `½(x-1)ᵀA(x-1)`.
pub fn quadratic(a: &SquareMatrix, x: &[f64]) -> (f64, Vec<f64>) {
    let d: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
    let g = a.mul_vec(&d);
    (0.5 * crate::linalg::dot(&d, &g), g)
}

/// `1 - e^{-½(x-1)ᵀA(x-1)} + ‖x-1‖₂²/100 + ‖x-1‖₄⁴/1000`.
pub fn bowl(a: &SquareMatrix, x: &[f64]) -> (f64, Vec<f64>) {
    let d: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
    let (q, qg) = quadratic(a, x);
    let e = (-q).exp();
    // 1 - e^{-q} loses precision for small q
    let f = -(-q).exp_m1() + d.iter().map(|v| v * v).sum::<f64>() / 100.0 + d.iter().map(|v| v.powi(4)).sum::<f64>() / 1000.0;
    let g = d
        .iter()
        .zip(&qg)
        .map(|(v, gq)| e * gq + v / 50.0 + v.powi(3) / 250.0)
        .collect();
    (f, g)
}

/// `Σ a(x_{i+1} - x_i²)² + (1 - x_i)²`.
pub fn rosenbrock(x: &[f64], a: f64) -> (f64, Vec<f64>) {
    let mut f = 0.0;
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len().saturating_sub(1) {
        let t = x[i + 1] - x[i] * x[i];
        let s = 1.0 - x[i];
        f += a * t * t + s * s;
        g[i] += -4.0 * a * x[i] * t - 2.0 * s;
        g[i + 1] += 2.0 * a * t;
    }
    (f, g)
}
