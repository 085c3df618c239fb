//! Stationary kernels and their analytic derivatives.
//!
//! Every kernel is written as a radial profile `k(s)` of the squared scaled
//! radius `s = ‖ṙ‖²`, `ṙ_d = γ_d (x_d - y_d)`. Derivatives with respect to
//! the inputs then follow from the chain rule:
//!
//! ```text
//! ∂k/∂x_d      =  2 k'(s) γ_d ṙ_d
//! ∂k/∂y_d      = -2 k'(s) γ_d ṙ_d
//! ∂²k/∂x_d∂y_e = -4 k''(s) (γ_d ṙ_d)(γ_e ṙ_e) - 2 k'(s) γ_d² δ_de
//! ```
//!
//! Writing the profiles in `s` rather than `‖ṙ‖` keeps every derivative
//! finite at `x = y`, including the printed Matérn form whose `‖ṙ‖` terms
//! cancel once expanded.

use crate::error::{GeboError, Result};

const EXP_FLOOR: f64 = -745.0;

/// Kernel family selected for the surrogate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// `exp(-‖ṙ‖²/2)`
    Gaussian,
    /// `(1 + √3‖ṙ‖ + ‖ṙ‖²) exp(-√3‖ṙ‖)`, exactly as printed for the
    /// "Matérn 5/2" kernel (note the √3 factors).
    MaternPrinted,
    /// `(1 + ‖ṙ‖²/(2α))^(-α)`
    RationalQuadratic { alpha: f64 },
}

impl KernelKind {
    /// Parses the config names `gaussian`, `matern`, `ratquad` (optionally
    /// `ratquad:<alpha>`, default α = 1).
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let mut parts = lower.splitn(2, ':');
        let head = parts.next().unwrap_or_default();
        let kind = match head {
            "gaussian" => KernelKind::Gaussian,
            "matern" => KernelKind::MaternPrinted,
            "ratquad" => {
                let alpha = match parts.next() {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| GeboError::Config(format!("bad ratquad alpha in {name:?}")))?,
                    None => 1.0,
                };
                KernelKind::RationalQuadratic { alpha }
            }
            _ => return Err(GeboError::Config(format!("unknown kernel {name:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn name(&self) -> String {
        match self {
            KernelKind::Gaussian => "gaussian".into(),
            KernelKind::MaternPrinted => "matern".into(),
            KernelKind::RationalQuadratic { alpha } => format!("ratquad:{alpha}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelKind::RationalQuadratic { alpha } = self {
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(GeboError::InvalidParameter(format!(
                    "rational quadratic alpha must be positive, got {alpha}"
                )));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            KernelKind::RationalQuadratic { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        match self {
            KernelKind::RationalQuadratic { .. } => KernelKind::RationalQuadratic { alpha },
            other => *other,
        }
    }
}

/// Nondimensional radius `ṙ_d = γ_d (x_d - y_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledRadius(Vec<f64>);

impl ScaledRadius {
    pub fn new(x: &[f64], y: &[f64], gamma: &[f64]) -> Result<Self> {
        check_inputs(x, y, gamma)?;
        Ok(Self(
            x.iter()
                .zip(y)
                .zip(gamma)
                .map(|((a, b), g)| g * (a - b))
                .collect(),
        ))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|r| r * r).sum()
    }
}

/// Radial profile `k(s)` and its first three derivatives in `s = ‖ṙ‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialProfile {
    pub k: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl RadialProfile {
    const ZERO: RadialProfile = RadialProfile {
        k: 0.0,
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
    };
}

/// Evaluates the radial profile at `s ≥ 0`.
pub fn profile(kind: KernelKind, s: f64) -> RadialProfile {
    match kind {
        KernelKind::Gaussian => {
            let expo = -0.5 * s;
            if expo < EXP_FLOOR {
                return RadialProfile::ZERO;
            }
            let k = expo.exp();
            RadialProfile {
                k,
                d1: -0.5 * k,
                d2: 0.25 * k,
                d3: -0.125 * k,
            }
        }
        KernelKind::MaternPrinted => {
            let t = s.sqrt();
            let sq3 = 3.0_f64.sqrt();
            let expo = -sq3 * t;
            if expo < EXP_FLOOR {
                return RadialProfile::ZERO;
            }
            let e = expo.exp();
            // k = (1 + √3 t + t²) e^{-√3 t}
            // dk/ds = -(1 + √3 t) e^{-√3 t} / 2, d²k/ds² = 3/4 e^{-√3 t}
            // d³k/ds³ = -3√3/(8t) e^{-√3 t}, which only ever multiplies
            // terms of order t⁴ and is set to zero at the origin.
            let d3 = if t > 0.0 { -3.0 * sq3 / (8.0 * t) * e } else { 0.0 };
            RadialProfile {
                k: (1.0 + sq3 * t + s) * e,
                d1: -0.5 * (1.0 + sq3 * t) * e,
                d2: 0.75 * e,
                d3,
            }
        }
        KernelKind::RationalQuadratic { alpha } => {
            let b = 1.0 + s / (2.0 * alpha);
            let k = b.powf(-alpha);
            RadialProfile {
                k,
                d1: -0.5 * k / b,
                d2: (alpha + 1.0) / (4.0 * alpha) * k / (b * b),
                d3: -(alpha + 1.0) * (alpha + 2.0) / (8.0 * alpha * alpha) * k / (b * b * b),
            }
        }
    }
}

/// Derivatives of `(k, dk/ds, d²k/ds²)` with respect to the rational
/// quadratic shape parameter α.
pub fn alpha_profile(alpha: f64, s: f64) -> (f64, f64, f64) {
    let p = profile(KernelKind::RationalQuadratic { alpha }, s);
    let u = s / (2.0 * alpha);
    let b = 1.0 + u;
    let lb = u.ln_1p();
    let dk = p.k * (-lb + u / b);
    let dk1 = p.d1 * (-lb + (alpha + 1.0) * u / (alpha * b));
    let dk2 = p.d2 * (-1.0 / (alpha * (alpha + 1.0)) - lb + (alpha + 2.0) * u / (alpha * b));
    (dk, dk1, dk2)
}

fn check_inputs(x: &[f64], y: &[f64], gamma: &[f64]) -> Result<()> {
    if x.len() != gamma.len() {
        return Err(GeboError::DimensionMismatch {
            expected: gamma.len(),
            got: x.len(),
        });
    }
    if y.len() != gamma.len() {
        return Err(GeboError::DimensionMismatch {
            expected: gamma.len(),
            got: y.len(),
        });
    }
    if let Some(g) = gamma.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(GeboError::InvalidParameter(format!(
            "length-scale rates must be positive, got {g}"
        )));
    }
    Ok(())
}

pub fn kernel_value(kind: KernelKind, x: &[f64], y: &[f64], gamma: &[f64]) -> Result<f64> {
    kind.validate()?;
    let r = ScaledRadius::new(x, y, gamma)?;
    Ok(profile(kind, r.squared_norm()).k)
}

/// Returns `(∂k/∂x, ∂k/∂y)`.
pub fn kernel_first_derivs(
    kind: KernelKind,
    x: &[f64],
    y: &[f64],
    gamma: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    kind.validate()?;
    let r = ScaledRadius::new(x, y, gamma)?;
    let p = profile(kind, r.squared_norm());
    let dx: Vec<f64> = r
        .as_slice()
        .iter()
        .zip(gamma)
        .map(|(rd, g)| 2.0 * p.d1 * g * rd)
        .collect();
    let dy = dx.iter().map(|v| -v).collect();
    Ok((dx, dy))
}

/// Returns the `n_d × n_d` matrix of `∂²k/∂x_d∂y_e`.
pub fn kernel_cross_hessian(
    kind: KernelKind,
    x: &[f64],
    y: &[f64],
    gamma: &[f64],
) -> Result<Vec<Vec<f64>>> {
    kind.validate()?;
    let r = ScaledRadius::new(x, y, gamma)?;
    let p = profile(kind, r.squared_norm());
    let a: Vec<f64> = r.as_slice().iter().zip(gamma).map(|(rd, g)| g * rd).collect();
    let nd = gamma.len();
    Ok((0..nd)
        .map(|d| {
            (0..nd)
                .map(|e| {
                    let diag = if d == e { -2.0 * p.d1 * gamma[d] * gamma[d] } else { 0.0 };
                    -4.0 * p.d2 * a[d] * a[e] + diag
                })
                .collect()
        })
        .collect())
}
