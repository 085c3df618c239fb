//! BFGS with a strong-Wolfe line search, used as the comparison baseline.
//!
//! Every oracle call, including line-search probes, becomes one trace
//! record so evaluation counts compare directly with the Bayesian optimizer.
//! Trial points violating a problem's linear constraints are rejected as if
//! the objective were infinite, without calling the oracle.

use std::time::Instant;

use crate::error::{GeboError, Result};
use crate::linalg::{dot, norm2};
use crate::optimizer::{stop_rule, StopDecision};
use crate::problems::Problem;
use crate::solver::bfgs_update;
use crate::trace::{BestTracker, RunStatus, RunTrace, TraceRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct QnConfig {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_ls_evals: usize,
    /// Converged once the best-point gradient norm drops this many decades.
    pub optimality_orders: f64,
    pub step_tol: f64,
    pub max_evals: usize,
    pub max_iter: usize,
    /// Stalled after this many evaluations without a strict improvement.
    pub stall_limit: usize,
}

impl Default for QnConfig {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_ls_evals: 25,
            optimality_orders: 10.0,
            step_tol: 1e-16,
            max_evals: 300,
            max_iter: 10_000,
            stall_limit: usize::MAX,
        }
    }
}

impl QnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(GeboError::Config(format!("need 0 < c1 < c2 < 1, got {} and {}", self.c1, self.c2)));
        }
        if self.max_ls_evals == 0 || self.max_evals == 0 {
            return Err(GeboError::Config("evaluation limits must be positive".into()));
        }
        Ok(())
    }
}

/// Value and directional derivative along the search line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePoint {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LineSearchOutcome {
    /// A point meeting both strong Wolfe conditions.
    Found(LinePoint),
    /// No acceptable point within the probe limit.
    Failed,
    /// The probe callback asked to stop.
    Aborted,
}

/// Bracketing and zoom search for a step satisfying the strong Wolfe
/// conditions. `phi` returns `None` to abort and a non-finite value for
/// points that cannot be evaluated.
pub fn strong_wolfe<F>(mut phi: F, f0: f64, d0: f64, alpha0: f64, c1: f64, c2: f64, max_evals: usize) -> LineSearchOutcome
where
    F: FnMut(f64) -> Option<(f64, f64)>,
{
    let origin = LinePoint {
        alpha: 0.0,
        value: f0,
        slope: d0,
    };
    let armijo = |p: &LinePoint| p.value <= f0 + c1 * p.alpha * d0;
    let curvature = |p: &LinePoint| p.slope.abs() <= -c2 * d0;
    let mut evals = 0;
    let mut probe = |alpha: f64, evals: &mut usize| -> Option<LinePoint> {
        *evals += 1;
        let (value, slope) = phi(alpha)?;
        Some(LinePoint { alpha, value, slope })
    };

    let mut prev = origin;
    let mut alpha = alpha0;
    let (mut lo, mut hi) = loop {
        if evals >= max_evals {
            return LineSearchOutcome::Failed;
        }
        let Some(p) = probe(alpha, &mut evals) else {
            return LineSearchOutcome::Aborted;
        };
        if !p.value.is_finite() || !armijo(&p) || (prev.alpha > 0.0 && p.value >= prev.value) {
            break (prev, p);
        }
        if curvature(&p) {
            return LineSearchOutcome::Found(p);
        }
        if p.slope >= 0.0 {
            break (p, prev);
        }
        prev = p;
        alpha *= 2.0;
    };
    while evals < max_evals {
        let width = hi.alpha - lo.alpha;
        if width.abs() <= f64::EPSILON * lo.alpha.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mut trial = cubic_minimizer(&lo, &hi).unwrap_or(f64::NAN);
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let margin = 0.1 * (b - a);
        if !(trial >= a + margin && trial <= b - margin) {
            trial = 0.5 * (lo.alpha + hi.alpha);
        }
        let Some(p) = probe(trial, &mut evals) else {
            return LineSearchOutcome::Aborted;
        };
        if !p.value.is_finite() || !armijo(&p) || p.value >= lo.value {
            hi = p;
        } else {
            if curvature(&p) {
                return LineSearchOutcome::Found(p);
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    LineSearchOutcome::Failed
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_minimizer(a: &LinePoint, b: &LinePoint) -> Option<f64> {
    if !(a.value.is_finite() && b.value.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Runs BFGS from `x0`.
pub fn bfgs_minimize<P: Problem + ?Sized>(problem: &mut P, x0: &[f64], cfg: &QnConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let n = problem.dim();
    if x0.len() != n {
        return Err(GeboError::DimensionMismatch { expected: n, got: x0.len() });
    }
    let start = Instant::now();
    let mut rec = Recorder {
        records: Vec::new(),
        tracker: BestTracker::new(),
        start,
        iter: 0,
    };
    let Some((mut f, mut g)) = rec.eval(problem, x0) else {
        return Ok(rec.finish(RunStatus::Failed("objective is not finite at the starting point".into())));
    };
    let mut x = x0.to_vec();
    let mut h: Vec<Vec<f64>> = identity(n);
    let mut scaled = false;

    for iter in 1..=cfg.max_iter {
        rec.iter = iter;
        match stop_rule(&rec.records, cfg.optimality_orders, cfg.stall_limit, cfg.max_evals) {
            StopDecision::Continue => {}
            StopDecision::Converged => return Ok(rec.finish(RunStatus::Converged)),
            StopDecision::Stalled => return Ok(rec.finish(RunStatus::Stalled)),
            StopDecision::BudgetExhausted => return Ok(rec.finish(RunStatus::BudgetExhausted)),
        }
        let mut p: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut d0 = dot(&g, &p);
        if !(d0 < 0.0) {
            h = identity(n);
            scaled = false;
            p = g.iter().map(|v| -v).collect();
            d0 = -dot(&g, &g);
        }
        // keep the first trial step short before any curvature is known
        let alpha0 = if scaled { 1.0 } else { (1.0 / norm2(&p)).min(1.0) };
        let mut accepted: Option<(Vec<f64>, Vec<f64>)> = None;
        let budget = cfg.max_evals;
        let outcome = strong_wolfe(
            |alpha| {
                if rec.records.len() >= budget {
                    return None;
                }
                let xt: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
                if problem.linear_constraints().iter().any(|c| c.violation(&xt) > 0.0) {
                    return Some((f64::INFINITY, f64::NAN));
                }
                match rec.eval(problem, &xt) {
                    Some((ft, gt)) => {
                        let slope = dot(&gt, &p);
                        accepted = Some((xt, gt));
                        Some((ft, slope))
                    }
                    None => Some((f64::INFINITY, f64::NAN)),
                }
            },
            f,
            d0,
            alpha0,
            cfg.c1,
            cfg.c2,
            cfg.max_ls_evals,
        );
        let point = match outcome {
            LineSearchOutcome::Found(pt) => pt,
            LineSearchOutcome::Failed => return Ok(rec.finish(RunStatus::Stalled)),
            LineSearchOutcome::Aborted => return Ok(rec.finish(RunStatus::BudgetExhausted)),
        };
        // the accepted point is always the most recent probe
        let (x_new, g_new) = accepted.expect("found point was evaluated");
        debug_assert!((x_new.iter().zip(&x).zip(&p).all(|((a, b), d)| (a - (b + point.alpha * d)).abs() <= 1e-12 * a.abs().max(1.0))));
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm2(&s) * norm2(&y) {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().enumerate().for_each(|(i, row)| row[i] = gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let step = norm2(&s);
        x = x_new;
        f = point.value;
        g = g_new;
        if step <= cfg.step_tol {
            return Ok(rec.finish(RunStatus::Stalled));
        }
    }
    Ok(rec.finish(RunStatus::BudgetExhausted))
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

struct Recorder {
    records: Vec<TraceRecord>,
    tracker: BestTracker,
    start: Instant,
    iter: usize,
}

impl Recorder {
    /// Calls the oracle and records the result; `None` for unusable output.
    fn eval<P: Problem + ?Sized>(&mut self, problem: &mut P, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let sample = problem.evaluate(x);
        let (f, seen, opt, grad) = match &sample {
            Ok(s) if s.value.is_finite() && s.gradient.iter().all(|g| g.is_finite()) => {
                (s.value, norm2(&s.gradient), norm2(s.reporting_gradient()), Some(s.gradient.clone()))
            }
            _ => (f64::INFINITY, f64::INFINITY, f64::INFINITY, None),
        };
        let (f_best, opt_norm, opt_ratio, seen_ratio) = self.tracker.push(f, seen, opt);
        self.records.push(TraceRecord {
            iter: self.iter,
            n_feval: self.records.len() + 1,
            x: x.to_vec(),
            f,
            grad_norm: seen,
            f_best,
            opt_norm,
            opt_ratio,
            seen_ratio,
            u_c: None,
            u_sigma: None,
            hp: None,
            elapsed: self.start.elapsed().as_secs_f64(),
        });
        grad.map(|g| (f, g))
    }

    fn finish(self, status: RunStatus) -> RunTrace {
        RunTrace {
            records: self.records,
            status,
        }
    }
}
