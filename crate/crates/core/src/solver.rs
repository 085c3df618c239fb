//! Projected quasi-Newton minimization over simple convex sets, plus an
//! augmented-Lagrangian wrapper for smooth inequality constraints.

use crate::linalg::{dot, norm2};

/// Options for [`minimize_projected`].
#[derive(Clone, Copy, Debug)]
pub struct QuasiNewtonOptions {
    pub max_iter: usize,
    /// Stop when the projected-gradient step `‖P(x - g) - x‖` falls below this.
    pub grad_tol: f64,
    /// Stop after this many iterations without relative decrease above `f_tol`.
    pub f_tol: f64,
    pub max_backtracks: usize,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-6,
            f_tol: 1e-14,
            max_backtracks: 40,
        }
    }
}

/// Outcome of a local minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` over a convex set given by its Euclidean projection.
///
/// `f` returns `None` where the objective cannot be evaluated; the line search
/// treats such points as infinitely bad. The start point is projected first
/// and must be evaluable.
pub fn minimize_projected<F, P>(mut f: F, project: P, x0: &[f64], opts: &QuasiNewtonOptions) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    P: Fn(&mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut h = identity(n);
    let mut scaled = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut slow = 0;
    while iterations < opts.max_iter {
        if projected_step_norm(&x, &g, &project) <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for attempt in 0..2 {
            let dir: Vec<f64> = if attempt == 0 {
                h.iter().map(|row| -dot(row, &g)).collect()
            } else {
                g.iter().map(|v| -v).collect()
            };
            if let Some(step) = projected_search(&mut f, &project, &x, fx, &g, &dir, opts, &mut evaluations) {
                accepted = Some(step);
                break;
            }
        }
        let Some((xn, fnew, gn)) = accepted else {
            converged = projected_step_norm(&x, &g, &project) <= opts.grad_tol.max(1e-10);
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm2(&s) * norm2(&y) {
            if !scaled {
                let scale = sy / dot(&y, &y);
                h = identity(n).into_iter().map(|r| r.into_iter().map(|v| v * scale).collect()).collect();
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let decrease = fx - fnew;
        if decrease <= opts.f_tol * fx.abs().max(1e-300) {
            slow += 1;
        } else {
            slow = 0;
        }
        x = xn;
        fx = fnew;
        g = gn;
        if slow >= 3 {
            break;
        }
    }
    Some(Minimum {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
        converged,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn projected_step_norm<P: Fn(&mut [f64])>(x: &[f64], g: &[f64], project: &P) -> f64 {
    let mut t: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    project(&mut t);
    t.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn projected_search<F, P>(
    f: &mut F,
    project: &P,
    x: &[f64],
    fx: f64,
    g: &[f64],
    dir: &[f64],
    opts: &QuasiNewtonOptions,
    evaluations: &mut usize,
) -> Option<(Vec<f64>, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    P: Fn(&mut [f64]),
{
    let mut t = 1.0;
    for _ in 0..opts.max_backtracks {
        let mut xt: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + t * d).collect();
        project(&mut xt);
        let predicted: f64 = g.iter().zip(xt.iter().zip(x)).map(|(gi, (a, b))| gi * (a - b)).sum();
        if predicted >= 0.0 {
            if xt == x {
                return None;
            }
            t *= 0.5;
            continue;
        }
        *evaluations += 1;
        if let Some((ft, gt)) = f(&xt) {
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * predicted {
                return Some((xt, ft, gt));
            }
        }
        t *= 0.5;
    }
    None
}

/// Inverse-Hessian BFGS update.
pub(crate) fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let rho = 1.0 / sy;
    let c = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i][j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Clamps `x` into the box `[lower, upper]`.
pub fn project_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Projects onto the ball of given radius centered at the origin.
pub fn project_ball(x: &mut [f64], radius: f64) {
    let n = norm2(x);
    if n > radius {
        let s = radius / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Options for [`minimize_constrained`].
#[derive(Clone, Copy, Debug)]
pub struct ConstrainedOptions {
    pub inner: QuasiNewtonOptions,
    pub max_outer: usize,
    /// Maximum allowed violation of the smooth inequality constraints.
    pub tol: f64,
    pub penalty0: f64,
}

impl Default for ConstrainedOptions {
    fn default() -> Self {
        Self {
            inner: QuasiNewtonOptions {
                max_iter: 200,
                grad_tol: 1e-9,
                f_tol: 1e-15,
                max_backtracks: 40,
            },
            max_outer: 12,
            tol: 1e-8,
            penalty0: 10.0,
        }
    }
}

/// Result of one smooth-constraint evaluation: value `c(x)` (feasible when
/// `c ≤ 0`) and gradient.
pub type ConstraintEval = (f64, Vec<f64>);

/// Minimizes `f` over a projectable convex set intersected with smooth
/// inequalities `c_j(x) ≤ 0`, using an augmented Lagrangian on the
/// inequalities and [`minimize_projected`] for the subproblems.
///
/// `cons` returns every constraint value and gradient at a point. The final
/// iterate may still violate the smooth constraints slightly; callers decide
/// how to restore feasibility.
pub fn minimize_constrained<F, C, P>(
    mut f: F,
    mut cons: C,
    n_cons: usize,
    project: P,
    x0: &[f64],
    opts: &ConstrainedOptions,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    C: FnMut(&[f64]) -> Option<Vec<ConstraintEval>>,
    P: Fn(&mut [f64]),
{
    if n_cons == 0 {
        return minimize_projected(f, project, x0, &opts.inner);
    }
    let mut lambda = vec![0.0; n_cons];
    let mut penalty = opts.penalty0;
    let mut x = x0.to_vec();
    let mut last_violation = f64::INFINITY;
    let mut best: Option<Minimum> = None;
    let mut evaluations = 0;
    for _ in 0..opts.max_outer {
        let lam = lambda.clone();
        let rho = penalty;
        let aug = |z: &[f64]| -> Option<(f64, Vec<f64>)> {
            let (mut v, mut g) = f(z)?;
            for ((c, cg), l) in cons(z)?.into_iter().zip(&lam) {
                let shifted = c + l / rho;
                if shifted > 0.0 {
                    v += 0.5 * rho * shifted * shifted - l * l / (2.0 * rho);
                    g.iter_mut().zip(&cg).for_each(|(gi, ci)| *gi += rho * shifted * ci);
                } else {
                    v -= l * l / (2.0 * rho);
                }
            }
            Some((v, g))
        };
        let sub = minimize_projected(aug, &project, &x, &opts.inner)?;
        evaluations += sub.evaluations;
        x = sub.x;
        let cs = cons(&x)?;
        let violation = cs.iter().map(|(c, _)| c.max(0.0)).fold(0.0, f64::max);
        for (l, (c, _)) in lambda.iter_mut().zip(&cs) {
            *l = (*l + penalty * c).max(0.0);
        }
        let (fx, gx) = f(&x)?;
        best = Some(Minimum {
            x: x.clone(),
            f: fx,
            grad: gx,
            iterations: sub.iterations,
            evaluations,
            converged: violation <= opts.tol && sub.converged,
        });
        if violation <= opts.tol && (sub.converged || violation == 0.0) {
            break;
        }
        if violation > 0.25 * last_violation {
            penalty *= 10.0;
        }
        last_violation = violation;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock_in_wide_box() {
        let opts = QuasiNewtonOptions {
            max_iter: 500,
            grad_tol: 1e-10,
            ..Default::default()
        };
        let m = minimize_projected(rosen, |x| project_box(x, &[-5.0, -5.0], &[5.0, 5.0]), &[-1.2, 1.0], &opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m);
    }

    #[test]
    fn active_box_bound() {
        // minimum of (x-3)² + (y+1)² on [0,1]² is (1, 0)
        let f = |x: &[f64]| Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]));
        let m = minimize_projected(f, |x| project_box(x, &[0.0, 0.0], &[1.0, 1.0]), &[0.5, 0.5], &Default::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-12 && m.x[1].abs() < 1e-12);
        assert!(m.converged);
    }

    #[test]
    fn ball_projection() {
        // minimum of a linear function over the unit ball is -g/|g|
        let f = |x: &[f64]| Some((3.0 * x[0] + 4.0 * x[1], vec![3.0, 4.0]));
        let m = minimize_projected(f, |x| project_ball(x, 1.0), &[0.0, 0.0], &Default::default()).unwrap();
        assert!((m.x[0] + 0.6).abs() < 1e-8 && (m.x[1] + 0.8).abs() < 1e-8, "{:?}", m.x);
    }

    #[test]
    fn augmented_lagrangian_linear_constraint() {
        // min (x-2)² + (y-2)² s.t. x + y ≤ 1 inside a radius-10 ball -> (0.5, 0.5)
        let f = |x: &[f64]| Some(((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 2.0)]));
        let c = |x: &[f64]| Some(vec![(x[0] + x[1] - 1.0, vec![1.0, 1.0])]);
        let m = minimize_constrained(f, c, 1, |x| project_ball(x, 10.0), &[0.0, 0.0], &Default::default()).unwrap();
        assert!((m.x[0] - 0.5).abs() < 1e-6 && (m.x[1] - 0.5).abs() < 1e-6, "{:?}", m.x);
        assert!(m.x[0] + m.x[1] - 1.0 <= 1e-8);
    }

    #[test]
    fn nonlinear_constraint() {
        // min x s.t. x² + y² ≤ 1 expressed as a smooth constraint -> (-1, 0)
        let f = |x: &[f64]| Some((x[0] + 0.1 * x[1] * x[1], vec![1.0, 0.2 * x[1]]));
        let c = |x: &[f64]| Some(vec![(x[0] * x[0] + x[1] * x[1] - 1.0, vec![2.0 * x[0], 2.0 * x[1]])]);
        let m = minimize_constrained(f, c, 1, |x| project_box(x, &[-3.0, -3.0], &[3.0, 3.0]), &[0.2, 0.3], &Default::default()).unwrap();
        assert!((m.x[0] + 1.0).abs() < 1e-6 && m.x[1].abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn unevaluable_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.25 { None } else { Some((x[0] * x[0], vec![2.0 * x[0]])) };
        let m = minimize_projected(f, |x| project_box(x, &[-1.0], &[1.0]), &[1.0], &Default::default()).unwrap();
        assert!(m.x[0] >= 0.25 && m.x[0] < 0.3);
    }
}
