//! Lorenz-63 parameter fit with energy-method sensitivities.
//!
//! The design variables are `(ρ, β)` with `σ` fixed. The objective averages
//! `(z - 35)²` over a window after a spin-up period and adds `20/β`.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::acquisition::LinearConstraint;
use crate::error::{GeboError, Result};
use crate::problems::integrator::{trapezoidal_step, NewtonSettings};
use crate::problems::{Problem, Sample};

const Z_TARGET: f64 = 35.0;
const BETA_WEIGHT: f64 = 20.0;

#[derive(Clone, Debug, PartialEq)]
pub struct LorenzConfig {
    pub sigma: f64,
    pub dt: f64,
    /// Spin-up time before the objective window.
    pub t0: f64,
    /// Length of the objective window.
    pub t_j: f64,
    pub u0: [f64; 3],
    pub newton: NewtonSettings,
    /// Box used for starting points, `(ρ, β)`.
    pub box_lower: [f64; 2],
    pub box_upper: [f64; 2],
    pub constraint: Option<LinearConstraint>,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            dt: 0.01,
            t0: 20.0,
            t_j: 10.0,
            u0: [1.0, 1.0, 1.0],
            newton: NewtonSettings::default(),
            box_lower: [25.0, 1.5],
            box_upper: [35.0, 3.5],
            // β ≤ 2.6 + 0.08(ρ - 25) stays below the Hopf curve, cutting off
            // the stable fixed points in the large-β corner
            constraint: Some(LinearConstraint {
                coeffs: vec![-0.08, 1.0],
                bound: 0.6,
            }),
        }
    }
}

impl LorenzConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_j > 0.0) || !(self.t0 >= 0.0) {
            return Err(GeboError::Config(format!(
                "Lorenz needs dt > 0, t_J > 0, t0 >= 0; got {}, {}, {}",
                self.dt, self.t_j, self.t0
            )));
        }
        Ok(())
    }
}

/// Right-hand side `(σ(y-x), x(ρ-z) - y, xy - βz)`.
pub fn lorenz_rhs(u: &[f64], sigma: f64, rho: f64, beta: f64) -> Vector3<f64> {
    let (x, y, z) = (u[0], u[1], u[2]);
    Vector3::new(sigma * (y - x), x * (rho - z) - y, x * y - beta * z)
}

/// Jacobian of [`lorenz_rhs`] with respect to the state.
pub fn lorenz_jacobian(u: &[f64], sigma: f64, rho: f64, beta: f64) -> Matrix3<f64> {
    let (x, y, z) = (u[0], u[1], u[2]);
    Matrix3::new(-sigma, sigma, 0.0, rho - z, -1.0, -x, y, x, -beta)
}

/// Derivatives of [`lorenz_rhs`] with respect to `ρ` and `β`.
pub fn lorenz_param_sens(u: &[f64]) -> [Vector3<f64>; 2] {
    [Vector3::new(0.0, u[0], 0.0), Vector3::new(0.0, 0.0, -u[2])]
}

/// Stabilizing term for a tangent equation `dv/dt + J v = …`: the negated
/// non-positive eigen-part of `J + Jᵀ`, so that `vᵀ(J + A)v ≥ 0`.
pub fn energy_clip(j: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = (j + j.transpose()).symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.min(0.0));
    -(eig.eigenvectors * Matrix3::from_diagonal(&clipped) * eig.eigenvectors.transpose())
}

/// Objective value with its energy-method gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct LorenzEvaluation {
    pub value: f64,
    pub gradient: [f64; 2],
    pub n_samples: usize,
}

#[derive(Clone, Debug)]
pub struct LorenzProblem {
    cfg: LorenzConfig,
    constraints: Vec<LinearConstraint>,
}

impl LorenzProblem {
    pub fn new(cfg: LorenzConfig) -> Result<Self> {
        cfg.validate()?;
        let constraints = cfg.constraint.iter().cloned().collect();
        Ok(Self { cfg, constraints })
    }

    pub fn config(&self) -> &LorenzConfig {
        &self.cfg
    }

    fn window(&self) -> (usize, usize) {
        let first = (self.cfg.t0 / self.cfg.dt).round() as usize + 1;
        let last = ((self.cfg.t0 + self.cfg.t_j) / self.cfg.dt).round() as usize;
        (first, last)
    }

    fn step(&self, u: &[f64], rho: f64, beta: f64, t: f64) -> Result<Vec<f64>> {
        let s = self.cfg.sigma;
        let rhs = |v: &[f64]| lorenz_rhs(v, s, rho, beta).as_slice().to_vec();
        let jac = |v: &[f64]| {
            let j = lorenz_jacobian(v, s, rho, beta);
            DMatrix::from_column_slice(3, 3, j.as_slice())
        };
        trapezoidal_step(&rhs, &jac, u, self.cfg.dt, t, &self.cfg.newton)
    }

    /// Objective only.
    pub fn objective(&self, rho: f64, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let (first, last) = self.window();
        let mut u = self.cfg.u0.to_vec();
        let mut acc = 0.0;
        for k in 1..=last {
            u = self.step(&u, rho, beta, (k - 1) as f64 * self.cfg.dt)?;
            if k >= first {
                acc += (u[2] - Z_TARGET).powi(2);
            }
        }
        let n = (last + 1 - first) as f64;
        Ok(acc / n + BETA_WEIGHT / beta)
    }

    /// Objective and energy-method gradient. Both tangents start from zero at
    /// `t = 0` and use the clipped Jacobian at every step.
    pub fn evaluate_with_gradient(&self, rho: f64, beta: f64) -> Result<LorenzEvaluation> {
        check_beta(beta)?;
        let (first, last) = self.window();
        let dt = self.cfg.dt;
        let s = self.cfg.sigma;
        let mut u = self.cfg.u0.to_vec();
        let mut tangents = [Vector3::zeros(), Vector3::zeros()];
        let mut op = stabilized_operator(&u, s, rho, beta);
        let mut forcing = lorenz_param_sens(&u);
        let (mut acc, mut grad) = (0.0, [0.0, 0.0]);
        for k in 1..=last {
            let next = self.step(&u, rho, beta, (k - 1) as f64 * dt)?;
            let op_next = stabilized_operator(&next, s, rho, beta);
            let forcing_next = lorenz_param_sens(&next);
            let lhs = Matrix3::identity() - 0.5 * dt * op_next;
            let rhs_op = Matrix3::identity() + 0.5 * dt * op;
            let lu = lhs.lu();
            for p in 0..2 {
                let b = rhs_op * tangents[p] + 0.5 * dt * (forcing[p] + forcing_next[p]);
                tangents[p] = lu
                    .solve(&b)
                    .ok_or_else(|| GeboError::NewtonDivergence { time: k as f64 * dt, residual: f64::NAN })?;
            }
            if k >= first {
                let dz = next[2] - Z_TARGET;
                acc += dz * dz;
                grad[0] += 2.0 * dz * tangents[0][2];
                grad[1] += 2.0 * dz * tangents[1][2];
            }
            u = next;
            op = op_next;
            forcing = forcing_next;
        }
        let n = (last + 1 - first) as f64;
        Ok(LorenzEvaluation {
            value: acc / n + BETA_WEIGHT / beta,
            gradient: [grad[0] / n, grad[1] / n - BETA_WEIGHT / (beta * beta)],
            n_samples: last + 1 - first,
        })
    }

    /// Norm of a homogeneous-plus-forced `ρ` tangent over `[0, t_end]`,
    /// starting from `v0`, with or without clipping.
    pub fn tangent_norms(&self, rho: f64, beta: f64, v0: [f64; 3], t_end: f64, clipped: bool) -> Result<Vec<f64>> {
        let dt = self.cfg.dt;
        let s = self.cfg.sigma;
        let operator = |u: &[f64]| {
            if clipped {
                stabilized_operator(u, s, rho, beta)
            } else {
                lorenz_jacobian(u, s, rho, beta)
            }
        };
        let mut u = self.cfg.u0.to_vec();
        let mut v = Vector3::from(v0);
        let mut op = operator(&u);
        let mut forcing = lorenz_param_sens(&u)[0];
        let mut norms = vec![v.norm()];
        for k in 1..=(t_end / dt).round() as usize {
            let next = self.step(&u, rho, beta, (k - 1) as f64 * dt)?;
            let op_next = operator(&next);
            let forcing_next = lorenz_param_sens(&next)[0];
            let b = (Matrix3::identity() + 0.5 * dt * op) * v + 0.5 * dt * (forcing + forcing_next);
            v = (Matrix3::identity() - 0.5 * dt * op_next)
                .lu()
                .solve(&b)
                .ok_or_else(|| GeboError::NewtonDivergence { time: k as f64 * dt, residual: f64::NAN })?;
            norms.push(v.norm());
            u = next;
            op = op_next;
            forcing = forcing_next;
        }
        Ok(norms)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(GeboError::InvalidParameter(format!("beta must be nonzero and finite, got {beta}")));
    }
    Ok(())
}

/// `∂f/∂u - A` where `A` is the clip for the residual Jacobian `-∂f/∂u`.
fn stabilized_operator(u: &[f64], sigma: f64, rho: f64, beta: f64) -> Matrix3<f64> {
    let j = lorenz_jacobian(u, sigma, rho, beta);
    j - energy_clip(&(-j))
}

impl Problem for LorenzProblem {
    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Sample> {
        if x.len() != 2 {
            return Err(GeboError::DimensionMismatch { expected: 2, got: x.len() });
        }
        let e = self.evaluate_with_gradient(x[0], x[1])?;
        Ok(Sample {
            value: e.value,
            gradient: e.gradient.to_vec(),
            true_gradient: None,
        })
    }

    fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }
}
