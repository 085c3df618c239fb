//! Acquisition functions and their minimization inside the trust regions.
//!
//! The inner problem is solved in the scaled coordinates
//! `z = (x - x_best) / sqrt(u_c)`, so the circular trust region becomes the
//! unit ball and is enforced exactly by projection. The σ bound and any
//! linear inequalities go through an augmented Lagrangian, and a final
//! bisection along the segment from `x_best` restores feasibility if the
//! solver stops slightly outside.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GeboError, Result};
use crate::gp::FittedSurrogate;
use crate::lhs::latin_hypercube;
use crate::linalg::{dot, norm2};
use crate::local_model::TrustRegionState;
use crate::solver::{minimize_constrained, project_ball, ConstrainedOptions, ConstraintEval};

/// Standard deviations below this use the zero-variance limit.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AcquisitionKind {
    /// Negated expected improvement.
    ExpectedImprovement,
    /// `μ - ω σ`.
    UpperConfidence { omega: f64 },
}

impl AcquisitionKind {
    /// Parses `"ei"` or `"uc:<ω>"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "ei" {
            return Ok(Self::ExpectedImprovement);
        }
        if let Some(w) = s.strip_prefix("uc:") {
            let omega: f64 = w
                .parse()
                .map_err(|_| GeboError::Config(format!("bad upper-confidence weight '{w}'")))?;
            if !(omega >= 0.0) || !omega.is_finite() {
                return Err(GeboError::Config(format!("omega must be nonnegative, got {omega}")));
            }
            return Ok(Self::UpperConfidence { omega });
        }
        Err(GeboError::Config(format!("unknown acquisition '{s}' (expected ei or uc:<omega>)")))
    }

    pub fn name(&self) -> String {
        match self {
            Self::ExpectedImprovement => "ei".into(),
            Self::UpperConfidence { omega } => format!("uc:{omega}"),
        }
    }
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Negated expected improvement from the posterior mean and standard
/// deviation, with its partial derivatives `(∂q/∂μ, ∂q/∂σ)`.
pub fn negated_ei(mu: f64, sigma: f64, f_best: f64) -> (f64, f64, f64) {
    let diff = f_best - mu;
    if sigma < SIGMA_FLOOR {
        return if diff > 0.0 { (-diff, 1.0, 0.0) } else { (0.0, 0.0, 0.0) };
    }
    let z = diff / sigma;
    let (cdf, pdf) = (normal_cdf(z), normal_pdf(z));
    (-(diff * cdf + sigma * pdf), cdf, -pdf)
}

/// Acquisition value and gradient at `x`.
pub fn acq_value_grad(kind: AcquisitionKind, s: &FittedSurrogate, x: &[f64], f_best: f64) -> Result<(f64, Vec<f64>)> {
    let p = s.evaluate(x, true)?;
    let sigma = p.variance.sqrt();
    // ∇σ = σ_K² ∇ratio / (2σ)
    let sigma_grad = |scale: f64| -> Vec<f64> {
        if sigma < SIGMA_FLOOR {
            vec![0.0; x.len()]
        } else {
            p.ratio_grad.iter().map(|g| scale * s.sigma_k2() * g / (2.0 * sigma)).collect()
        }
    };
    match kind {
        AcquisitionKind::UpperConfidence { omega } => {
            let sg = sigma_grad(1.0);
            let grad = p.mean_grad.iter().zip(&sg).map(|(m, g)| m - omega * g).collect();
            Ok((p.mean - omega * sigma, grad))
        }
        AcquisitionKind::ExpectedImprovement => {
            let (q, dmu, dsigma) = negated_ei(p.mean, sigma, f_best);
            let sg = sigma_grad(1.0);
            let grad = p.mean_grad.iter().zip(&sg).map(|(m, g)| dmu * m + dsigma * g).collect();
            Ok((q, grad))
        }
    }
}

/// Linear inequality `coeffs · x ≤ bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

impl LinearConstraint {
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.bound
    }
}

/// Settings of the multistart acquisition minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    pub n_lhs: usize,
    pub n_best: usize,
    pub max_iter: usize,
    /// Allowed violation of the σ and linear constraints.
    pub constraint_tol: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            kind: AcquisitionKind::ExpectedImprovement,
            n_lhs: 5,
            n_best: 5,
            max_iter: 200,
            constraint_tol: 1e-8,
        }
    }
}

/// Chosen next point.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionResult {
    pub x: Vec<f64>,
    pub q: f64,
    /// No candidate satisfied every constraint and a clipped step was used.
    pub fallback: bool,
}

/// Minimizes the acquisition function within the trust regions, starting
/// from `n_lhs` LHS points in the box `x_best ± sqrt(u_c)` and the `n_best`
/// lowest-merit points of `region_points` (given with their merit values).
#[allow(clippy::too_many_arguments)]
pub fn minimize_acquisition(
    s: &FittedSurrogate,
    cfg: &AcquisitionConfig,
    tr: &TrustRegionState,
    x_best: &[f64],
    f_best: f64,
    region_points: &[(Vec<f64>, f64)],
    linear: &[LinearConstraint],
    seed: u64,
) -> Result<AcquisitionResult> {
    let n_d = x_best.len();
    if s.n_d() != n_d {
        return Err(GeboError::DimensionMismatch {
            expected: s.n_d(),
            got: n_d,
        });
    }
    if !(tr.u_c > 0.0) {
        return Err(GeboError::InvalidParameter(format!("circular bound must be positive, got {}", tr.u_c)));
    }
    let radius = tr.u_c.sqrt();
    let to_x = |z: &[f64]| -> Vec<f64> { x_best.iter().zip(z).map(|(b, v)| b + radius * v).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = vec![-1.0; n_d];
    let hi = vec![1.0; n_d];
    let mut starts: Vec<Vec<f64>> = latin_hypercube(cfg.n_lhs, &lo, &hi, &mut rng);
    let mut ranked: Vec<&(Vec<f64>, f64)> = region_points.iter().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (p, _) in ranked.into_iter().take(cfg.n_best) {
        starts.push(p.iter().zip(x_best).map(|(a, b)| (a - b) / radius).collect());
    }
    for z in starts.iter_mut() {
        project_ball(z, 1.0);
    }

    let kind = cfg.kind;
    let acq = |x: &[f64]| acq_value_grad(kind, s, x, f_best);
    let mut scale = 0.0f64;
    for z in &starts {
        if let Ok((q, _)) = acq(&to_x(z)) {
            scale = scale.max(q.abs());
        }
    }
    if !(scale > 0.0) || !scale.is_finite() {
        scale = s.sigma_k2().sqrt().max(f64::MIN_POSITIVE);
    }

    let u_sigma = tr.u_sigma.filter(|u| *u < 1.0);
    let lin_norms: Vec<f64> = linear.iter().map(|c| norm2(&c.coeffs).max(f64::MIN_POSITIVE)).collect();
    let n_cons = u_sigma.is_some() as usize + linear.len();
    let feasible = |x: &[f64]| -> Result<bool> {
        if let Some(u) = u_sigma {
            if s.variance_ratio(x)? > u + cfg.constraint_tol {
                return Ok(false);
            }
        }
        Ok(linear.iter().all(|c| c.violation(x) <= cfg.constraint_tol))
    };

    let objective = |z: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (q, g) = acq(&to_x(z)).ok()?;
        Some((q / scale, g.into_iter().map(|v| v * radius / scale).collect()))
    };
    let constraints = |z: &[f64]| -> Option<Vec<ConstraintEval>> {
        let x = to_x(z);
        let mut out = Vec::with_capacity(n_cons);
        if let Some(u) = u_sigma {
            let p = s.evaluate(&x, true).ok()?;
            out.push((p.ratio / u - 1.0, p.ratio_grad.iter().map(|g| g * radius / u).collect()));
        }
        for (c, nrm) in linear.iter().zip(&lin_norms) {
            out.push((c.violation(&x) / nrm, c.coeffs.iter().map(|a| a * radius / nrm).collect()));
        }
        Some(out)
    };
    let mut opts = ConstrainedOptions::default();
    opts.inner.max_iter = cfg.max_iter;
    // the scaled σ constraint is relative to u_σ
    opts.tol = cfg.constraint_tol / u_sigma.unwrap_or(1.0).max(1e-300);

    let best_feasible_x = feasible(x_best).unwrap_or(false);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut best_infeasible: Option<(Vec<f64>, f64)> = None;
    let mut consider = |x: Vec<f64>, ok: bool| {
        let Ok((q, _)) = acq(&x) else { return };
        let slot = if ok { &mut best } else { &mut best_infeasible };
        if slot.as_ref().map_or(true, |(_, bq)| q < *bq) {
            *slot = Some((x, q));
        }
    };
    for z0 in &starts {
        let x0 = to_x(z0);
        let ok0 = feasible(&x0)?;
        consider(x0, ok0);
        let Some(sol) = minimize_constrained(objective, constraints, n_cons, |z| project_ball(z, 1.0), z0, &opts) else {
            continue;
        };
        let x = to_x(&sol.x);
        if feasible(&x)? {
            consider(x, true);
        } else if best_feasible_x {
            let restored = restore_along_segment(x_best, &x, |p| feasible(p).unwrap_or(false));
            let ok = feasible(&restored)?;
            consider(restored, ok);
        } else {
            consider(x, false);
        }
    }
    if let Some((x, q)) = best {
        return Ok(AcquisitionResult { x, q, fallback: false });
    }
    match best_infeasible {
        Some((mut x, _)) => {
            // clip the step into the circular trust region
            let mut step: Vec<f64> = x.iter().zip(x_best).map(|(a, b)| a - b).collect();
            project_ball(&mut step, radius);
            x = x_best.iter().zip(&step).map(|(b, d)| b + d).collect();
            let q = acq(&x)?.0;
            Ok(AcquisitionResult { x, q, fallback: true })
        }
        None => Err(GeboError::Oracle("acquisition could not be evaluated at any start point".into())),
    }
}

/// Farthest feasible point on the segment from the feasible `from` to `to`.
fn restore_along_segment(from: &[f64], to: &[f64], feasible: impl Fn(&[f64]) -> bool) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}
