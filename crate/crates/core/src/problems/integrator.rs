//! Implicit trapezoidal time marching with a Newton solve per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeboError, Result};

/// Newton settings for each implicit step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Tolerance on the max-norm residual, relative to `max(1, ‖u‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 20 }
    }
}

/// One trapezoidal step `u₁ = u₀ + Δt/2 (f(u₀) + f(u₁))` starting at time `t`
/// (used only for diagnostics).
pub fn trapezoidal_step<F, J>(rhs: &F, jac: &J, u: &[f64], dt: f64, t: f64, newton: &NewtonSettings) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = u.len();
    let f0 = rhs(u);
    let base: Vec<f64> = u.iter().zip(&f0).map(|(a, b)| a + 0.5 * dt * b).collect();
    // explicit Euler predictor
    let mut next: Vec<f64> = u.iter().zip(&f0).map(|(a, b)| a + dt * b).collect();
    let scale = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut residual = f64::INFINITY;
    for _ in 0..=newton.max_iter {
        let f1 = rhs(&next);
        let r: Vec<f64> = (0..n).map(|i| next[i] - base[i] - 0.5 * dt * f1[i]).collect();
        residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !residual.is_finite() {
            break;
        }
        if residual <= newton.tol * scale {
            return Ok(next);
        }
        let mut m = -0.5 * dt * jac(&next);
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let Some(delta) = m.lu().solve(&DVector::from_vec(r)) else {
            break;
        };
        next.iter_mut().zip(delta.iter()).for_each(|(x, d)| *x -= d);
    }
    Err(GeboError::NewtonDivergence { time: t, residual })
}

/// Trajectory `[u(0), u(Δt), …, u(n Δt)]` with `n = round(t_end / Δt)`.
pub fn trapezoidal_integrate<F, J>(rhs: F, jac: J, u0: &[f64], dt: f64, t_end: f64, newton: &NewtonSettings) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(GeboError::InvalidParameter(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    let n = (t_end / dt).round() as usize;
    let mut traj = Vec::with_capacity(n + 1);
    traj.push(u0.to_vec());
    for k in 0..n {
        let next = trapezoidal_step(&rhs, &jac, &traj[k], dt, k as f64 * dt, newton)?;
        traj.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(lambda: f64) -> (impl Fn(&[f64]) -> Vec<f64>, impl Fn(&[f64]) -> DMatrix<f64>) {
        (move |u: &[f64]| vec![lambda * u[0]], move |_: &[f64]| DMatrix::from_element(1, 1, lambda))
    }

    #[test]
    fn one_step_closed_form() {
        let (f, j) = linear(-3.0);
        let dt = 0.1;
        let traj = trapezoidal_integrate(f, j, &[2.0], dt, dt, &NewtonSettings::default()).unwrap();
        let expected = 2.0 * (1.0 - 1.5 * dt) / (1.0 + 1.5 * dt);
        assert!((traj[1][0] - expected).abs() < 1e-14);
    }

    #[test]
    fn second_order_convergence() {
        // pendulum-like nonlinear system on t ∈ [0, 2]
        let f = |u: &[f64]| vec![u[1], -u[0].sin()];
        let j = |u: &[f64]| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -u[0].cos(), 0.0]);
        let newton = NewtonSettings::default();
        let reference = trapezoidal_integrate(f, j, &[1.0, 0.0], 0.0005, 2.0, &newton).unwrap();
        let end = reference.last().unwrap().clone();
        let err = |dt: f64| {
            let t = trapezoidal_integrate(f, j, &[1.0, 0.0], dt, 2.0, &newton).unwrap();
            let u = t.last().unwrap();
            ((u[0] - end[0]).powi(2) + (u[1] - end[1]).powi(2)).sqrt()
        };
        let ratio = err(0.05) / err(0.025);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn newton_failure_is_reported() {
        // u' = u² from 10 with Δt = 1: the step equation ½u² - u + 60 = 0 has no real root
        let f = |u: &[f64]| vec![u[0] * u[0]];
        let j = |u: &[f64]| DMatrix::from_element(1, 1, 2.0 * u[0]);
        let r = trapezoidal_integrate(f, j, &[10.0], 1.0, 1.0, &NewtonSettings::default());
        assert!(matches!(r, Err(GeboError::NewtonDivergence { .. })));
    }
}
