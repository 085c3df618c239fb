//! Test problems: analytic functions, a noisy-gradient wrapper and the
//! Lorenz-63 parameter fit.

pub mod analytic;
pub mod integrator;
pub mod lorenz;
pub mod noisy;

use crate::acquisition::LinearConstraint;
use crate::error::{GeboError, Result};

pub use analytic::{AnalyticKind, AnalyticProblem};
pub use lorenz::{LorenzConfig, LorenzProblem};
pub use noisy::NoisyGradient;

/// Objective value and gradient at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub value: f64,
    /// Gradient seen by the optimizer.
    pub gradient: Vec<f64>,
    /// Noise-free gradient when the optimizer only sees a perturbed one.
    pub true_gradient: Option<Vec<f64>>,
}

impl Sample {
    /// Gradient used for reporting optimality.
    pub fn reporting_gradient(&self) -> &[f64] {
        self.true_gradient.as_deref().unwrap_or(&self.gradient)
    }
}

/// Objective-and-gradient oracle.
pub trait Problem {
    fn dim(&self) -> usize;

    fn evaluate(&mut self, x: &[f64]) -> Result<Sample>;

    /// Inequalities `c · x ≤ b` the optimizer must respect.
    fn linear_constraints(&self) -> &[LinearConstraint] {
        &[]
    }
}

impl<P: Problem + ?Sized> Problem for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Sample> {
        (**self).evaluate(x)
    }

    fn linear_constraints(&self) -> &[LinearConstraint] {
        (**self).linear_constraints()
    }
}

/// Problem selected by name: `quad:<n_d>`, `bowl:<n_d>`, `rosen:<n_d>:<a>`,
/// `lorenz:<t_J>` (with the default linear constraint) or `lorenz:<t_J>:free`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Analytic { kind: AnalyticKind, n_d: usize },
    Lorenz { t_j: f64, constrained: bool },
}

impl ProblemSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || GeboError::Config(format!("cannot parse problem '{s}'"));
        let num = |v: &str| -> Result<f64> { v.parse::<f64>().map_err(|_| bad()) };
        let dim = |v: &str| -> Result<usize> { v.parse::<usize>().map_err(|_| bad()) };
        let spec = match parts.as_slice() {
            ["quad", n] => Self::Analytic {
                kind: AnalyticKind::Quadratic,
                n_d: dim(n)?,
            },
            ["bowl", n] => Self::Analytic {
                kind: AnalyticKind::Bowl,
                n_d: dim(n)?,
            },
            ["rosen", n, a] => Self::Analytic {
                kind: AnalyticKind::Rosenbrock { a: num(a)? },
                n_d: dim(n)?,
            },
            ["lorenz", t] => Self::Lorenz {
                t_j: num(t)?,
                constrained: true,
            },
            ["lorenz", t, "free"] => Self::Lorenz {
                t_j: num(t)?,
                constrained: false,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Analytic { kind, n_d } => AnalyticProblem::new(*kind, *n_d).map(|_| ()),
            Self::Lorenz { t_j, .. } if *t_j > 0.0 && t_j.is_finite() => Ok(()),
            Self::Lorenz { t_j, .. } => Err(GeboError::Config(format!("t_J must be positive, got {t_j}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Analytic { kind, n_d } => match kind {
                AnalyticKind::Quadratic => format!("quad:{n_d}"),
                AnalyticKind::Bowl => format!("bowl:{n_d}"),
                AnalyticKind::Rosenbrock { a } => format!("rosen:{n_d}:{a}"),
            },
            Self::Lorenz { t_j, constrained: true } => format!("lorenz:{t_j}"),
            Self::Lorenz { t_j, constrained: false } => format!("lorenz:{t_j}:free"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Analytic { n_d, .. } => *n_d,
            Self::Lorenz { .. } => 2,
        }
    }

    /// Default box for starting points.
    pub fn start_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Analytic { n_d, .. } => (vec![-10.0; *n_d], vec![10.0; *n_d]),
            Self::Lorenz { .. } => {
                let c = LorenzConfig::default();
                (c.box_lower.to_vec(), c.box_upper.to_vec())
            }
        }
    }

    /// Builds the oracle; a positive `grad_noise` wraps it in [`NoisyGradient`].
    pub fn build(&self, grad_noise: f64, noise_seed: u64) -> Result<Box<dyn Problem>> {
        let base: Box<dyn Problem> = match self {
            Self::Analytic { kind, n_d } => Box::new(AnalyticProblem::new(*kind, *n_d)?),
            Self::Lorenz { t_j, constrained } => {
                let mut cfg = LorenzConfig {
                    t_j: *t_j,
                    ..LorenzConfig::default()
                };
                if !constrained {
                    cfg.constraint = None;
                }
                Box::new(LorenzProblem::new(cfg)?)
            }
        };
        if grad_noise > 0.0 {
            Ok(Box::new(NoisyGradient::new(base, grad_noise, noise_seed)?))
        } else if grad_noise == 0.0 {
            Ok(base)
        } else {
            Err(GeboError::Config(format!("gradient noise must be nonnegative, got {grad_noise}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["quad:10", "bowl:3", "rosen:20:100", "lorenz:10", "lorenz:5:free"] {
            assert_eq!(ProblemSpec::parse(s).unwrap().name(), s);
        }
        for s in ["quad", "rosen:1:100", "lorenz:-1", "sphere:3", "quad:x"] {
            assert!(ProblemSpec::parse(s).is_err(), "{s}");
        }
    }
}
