//! Data region selection and the circular and σ trust-region bounds.

use crate::error::{GeboError, Result};

/// Evaluation points used to fit the surrogate.
#[derive(Clone, Debug, PartialEq)]
pub struct DataRegion {
    /// Indices into the full history, in history order.
    pub indices: Vec<usize>,
    /// Largest distance to `x_best` among the selected points.
    pub radius: f64,
}

impl DataRegion {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Selects the points near `x_best` plus the most recent ones.
///
/// Keeps every point within `max(ℓ_last, ℓ_close)` of `x_best`, where
/// `ℓ_close` is the `n_close`-th smallest distance and `ℓ_last` the largest
/// distance among the `n_last` most recent points.
pub fn select_data_region(history: &[Vec<f64>], x_best: &[f64], n_close: usize, n_last: usize) -> Result<DataRegion> {
    if history.is_empty() {
        return Err(GeboError::Empty("history is empty".into()));
    }
    if n_close == 0 {
        return Err(GeboError::Config("n_close must be at least 1".into()));
    }
    let dist: Vec<f64> = history
        .iter()
        .map(|x| {
            if x.len() != x_best.len() {
                return f64::NAN;
            }
            x.iter().zip(x_best).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .collect();
    if dist.iter().any(|d| d.is_nan()) {
        return Err(GeboError::DimensionMismatch {
            expected: x_best.len(),
            got: history.iter().map(Vec::len).find(|l| *l != x_best.len()).unwrap_or(0),
        });
    }
    let n_x = history.len();
    if n_x <= n_close {
        return Ok(DataRegion {
            indices: (0..n_x).collect(),
            radius: dist.iter().copied().fold(0.0, f64::max),
        });
    }
    let first_recent = n_x.saturating_sub(n_last);
    let l_last = dist[first_recent..].iter().copied().fold(0.0, f64::max);
    let mut sorted = dist.clone();
    sorted.sort_by(f64::total_cmp);
    let l_close = sorted[n_close - 1];
    let radius = l_last.max(l_close);
    Ok(DataRegion {
        indices: (0..n_x).filter(|&i| dist[i] <= radius).collect(),
        radius,
    })
}

/// `‖x - x_best‖²` and its gradient.
pub fn circular_tr_value(x: &[f64], x_best: &[f64]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = x.iter().zip(x_best).map(|(a, b)| a - b).collect();
    let v = diff.iter().map(|d| d * d).sum();
    (v, diff.into_iter().map(|d| 2.0 * d).collect())
}

/// Constants of both trust-region update rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrustRegionConfig {
    pub u_c0: f64,
    pub rho_inc: f64,
    pub rho_dec: f64,
    pub rho_data: f64,
    pub u_sigma0: f64,
    pub u_sigma_min: f64,
    pub u_sigma_max: f64,
    /// Data-region size from which the σ bound becomes active.
    pub n_data_sigma: usize,
    /// Data-region size from which `ρ_data ℓ_data` caps the circular bound.
    pub n_data_cap: usize,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            u_c0: 1.0,
            rho_inc: 2.0,
            rho_dec: 0.5,
            rho_data: 0.9,
            u_sigma0: 0.04,
            u_sigma_min: 0.0025,
            u_sigma_max: 0.16,
            n_data_sigma: 10,
            n_data_cap: 5,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.u_c0 > 0.0
            && self.rho_dec > 0.0
            && self.rho_dec < 1.0
            && self.rho_inc > 1.0
            && self.rho_data > 0.0
            && self.u_sigma_min > 0.0
            && self.u_sigma_min <= self.u_sigma0
            && self.u_sigma0 < self.u_sigma_max
            && self.u_sigma_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(GeboError::Config(format!("invalid trust-region constants: {self:?}")))
        }
    }
}

/// Outcome of the latest evaluations relative to the best merit value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    /// The latest evaluation improved on the previous best.
    Improved,
    /// The latest did not, but the one before it did.
    Recent,
    /// Neither of the last two evaluations improved.
    Stalled,
}

/// Classifies the latest merit value `j_i` given the one before it and the
/// best value prior to `j_i`.
pub fn classify_progress(j_i: f64, j_prev: Option<f64>, j_best_prev: f64) -> Progress {
    if j_i < j_best_prev {
        Progress::Improved
    } else if j_prev.is_some_and(|p| p <= j_best_prev) {
        Progress::Recent
    } else {
        Progress::Stalled
    }
}

/// Current bounds: `u_c` on the squared distance, `u_σ` on the variance ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrustRegionState {
    pub u_c: f64,
    /// `None` while the σ trust region is inactive.
    pub u_sigma: Option<f64>,
}

impl TrustRegionState {
    pub fn initial(cfg: &TrustRegionConfig) -> Self {
        Self {
            u_c: cfg.u_c0,
            u_sigma: None,
        }
    }

    pub fn u_sigma_or_inf(&self) -> f64 {
        self.u_sigma.unwrap_or(f64::INFINITY)
    }
}

/// Next circular bound from the previous bound `u_prev` and the circular
/// constraint value `g_prev` of the latest evaluated point.
pub fn update_circular_bound(
    cfg: &TrustRegionConfig,
    u_prev: f64,
    progress: Progress,
    g_prev: f64,
    n_data: usize,
    l_data: f64,
) -> f64 {
    let mut u = if n_data <= 1 {
        cfg.u_c0
    } else {
        match progress {
            Progress::Improved => (cfg.rho_inc * g_prev).max(u_prev),
            Progress::Recent => u_prev,
            Progress::Stalled => cfg.rho_dec * u_prev,
        }
    };
    if n_data >= cfg.n_data_cap {
        u = u.min(cfg.rho_data * l_data);
    }
    u
}

/// Next σ bound; `None` while the data region is too small.
pub fn update_sigma_bound(
    cfg: &TrustRegionConfig,
    u_prev: Option<f64>,
    progress: Progress,
    g_prev: f64,
    n_data: usize,
) -> Option<f64> {
    if n_data < cfg.n_data_sigma {
        return None;
    }
    let Some(u_prev) = u_prev.filter(|_| n_data > cfg.n_data_sigma) else {
        return Some(cfg.u_sigma0);
    };
    Some(match progress {
        Progress::Improved => (cfg.rho_inc * g_prev).min(cfg.u_sigma_max).max(u_prev),
        Progress::Recent => u_prev,
        Progress::Stalled => (cfg.rho_dec * u_prev).max(cfg.u_sigma_min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_history_returns_everything() {
        let h: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0]).collect();
        let r = select_data_region(&h, &[0.0, 0.0], 20, 3).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.radius, 4.0);
    }

    #[test]
    fn recent_far_points_widen_region() {
        let mut h: Vec<Vec<f64>> = (0..27).map(|i| vec![0.01 * i as f64]).collect();
        h.extend([vec![5.0], vec![-6.0], vec![7.0]]);
        let r = select_data_region(&h, &[0.0], 20, 3).unwrap();
        assert_eq!(r.radius, 7.0);
        assert_eq!(r.len(), 30);
    }

    #[test]
    fn close_points_selected_when_recent_are_near() {
        let h: Vec<Vec<f64>> = (0..30).map(|i| vec![30.0 - i as f64]).collect();
        let r = select_data_region(&h, &[0.0], 20, 3).unwrap();
        assert_eq!(r.radius, 20.0);
        assert_eq!(r.indices, (10..30).collect::<Vec<_>>());
    }

    #[test]
    fn duplicate_of_best_is_included() {
        let mut h: Vec<Vec<f64>> = (0..25).map(|i| vec![1.0 + i as f64]).collect();
        h.insert(3, vec![0.0]);
        h.insert(10, vec![0.0]);
        let r = select_data_region(&h, &[0.0], 20, 3).unwrap();
        assert!(r.indices.contains(&3) && r.indices.contains(&10));
    }

    #[test]
    fn circular_value_and_gradient() {
        assert_eq!(circular_tr_value(&[1.0, 2.0], &[1.0, 2.0]).0, 0.0);
        let (v, g) = circular_tr_value(&[3.0, 4.0], &[0.0, 0.0]);
        assert_eq!(v, 25.0);
        let h = 1e-6;
        let fd0 = (circular_tr_value(&[3.0 + h, 4.0], &[0.0, 0.0]).0 - circular_tr_value(&[3.0 - h, 4.0], &[0.0, 0.0]).0) / (2.0 * h);
        assert!((fd0 - g[0]).abs() < 1e-7);
    }

    #[test]
    fn circular_examples() {
        let cfg = TrustRegionConfig::default();
        assert_eq!(update_circular_bound(&cfg, 0.3, Progress::Improved, 0.1, 1, 0.0), 1.0);
        assert_eq!(update_circular_bound(&cfg, 0.5, Progress::Improved, 0.3, 3, 10.0), 0.6);
        assert_eq!(update_circular_bound(&cfg, 0.5, Progress::Stalled, 0.3, 3, 10.0), 0.25);
        assert_eq!(update_circular_bound(&cfg, 0.5, Progress::Recent, 0.3, 3, 10.0), 0.5);
        // cap by ρ_data ℓ_data once the region has 5 points
        assert_eq!(update_circular_bound(&cfg, 0.5, Progress::Recent, 0.3, 5, 0.1), 0.9 * 0.1);
    }

    #[test]
    fn sigma_examples() {
        let cfg = TrustRegionConfig::default();
        assert_eq!(update_sigma_bound(&cfg, None, Progress::Improved, 0.1, 9), None);
        assert_eq!(update_sigma_bound(&cfg, Some(0.1), Progress::Improved, 0.1, 10), Some(0.04));
        assert_eq!(update_sigma_bound(&cfg, Some(0.01), Progress::Stalled, 0.1, 12), Some(0.005));
        assert_eq!(update_sigma_bound(&cfg, Some(0.003), Progress::Stalled, 0.1, 12), Some(0.0025));
        assert_eq!(update_sigma_bound(&cfg, Some(0.05), Progress::Improved, 0.1, 12), Some(0.16));
        assert_eq!(update_sigma_bound(&cfg, Some(0.05), Progress::Improved, 0.01, 12), Some(0.05));
        assert_eq!(update_sigma_bound(&cfg, None, Progress::Stalled, 0.01, 15), Some(0.04));
    }

    #[test]
    fn progress_classification() {
        assert_eq!(classify_progress(0.5, Some(2.0), 1.0), Progress::Improved);
        assert_eq!(classify_progress(1.5, Some(1.0), 1.0), Progress::Recent);
        assert_eq!(classify_progress(1.5, Some(3.0), 1.0), Progress::Stalled);
        assert_eq!(classify_progress(1.0, None, 1.0), Progress::Stalled);
    }

    #[test]
    fn geometric_contraction() {
        let cfg = TrustRegionConfig::default();
        let mut u = 0.8;
        for k in 1..=10 {
            u = update_circular_bound(&cfg, u, Progress::Stalled, 0.0, 3, 100.0);
            assert!((u - 0.8 * 0.5f64.powi(k)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn region_contains_best_and_recent(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..60),
            best in 0usize..60,
            n_close in 1usize..25,
            n_last in 0usize..5,
        ) {
            let best = best % pts.len();
            let r = select_data_region(&pts, &pts[best], n_close, n_last).unwrap();
            prop_assert!(r.indices.contains(&best));
            for i in pts.len().saturating_sub(n_last)..pts.len() {
                prop_assert!(r.indices.contains(&i));
            }
            prop_assert!(r.len() >= n_close.min(pts.len()));
        }

        #[test]
        fn sigma_bound_stays_in_range(
            steps in prop::collection::vec((0u8..3, 0.0f64..1.0), 1..50),
        ) {
            let cfg = TrustRegionConfig::default();
            let mut u = None;
            for (k, (p, g)) in steps.into_iter().enumerate() {
                let progress = [Progress::Improved, Progress::Recent, Progress::Stalled][p as usize];
                u = update_sigma_bound(&cfg, u, progress, g, 10 + k);
                let v = u.unwrap();
                prop_assert!((0.0025..=0.16).contains(&v));
            }
        }

        #[test]
        fn updates_are_pure(u in 0.01f64..2.0, g in 0.0f64..1.0, n in 1usize..40, l in 0.0f64..3.0) {
            let cfg = TrustRegionConfig::default();
            for p in [Progress::Improved, Progress::Recent, Progress::Stalled] {
                prop_assert_eq!(update_circular_bound(&cfg, u, p, g, n, l), update_circular_bound(&cfg, u, p, g, n, l));
            }
        }
    }
}
