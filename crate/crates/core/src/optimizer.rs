//! Local Bayesian optimization loop with gradient-enhanced surrogates.

use std::time::Instant;

use crate::acquisition::{minimize_acquisition, AcquisitionConfig};
use crate::error::{GeboError, Result};
use crate::gp::{fit_surrogate, DataSet, FittedSurrogate, Hyperparameters, DEFAULT_COND_MAX};
use crate::kernels::KernelKind;
use crate::likelihood::{select_hyperparameters, HpSearchConfig, NoiseMode};
use crate::linalg::norm2;
use crate::local_model::{
    circular_tr_value, classify_progress, select_data_region, update_circular_bound, update_sigma_bound,
    TrustRegionConfig, TrustRegionState,
};
use crate::problems::{Problem, Sample};
use crate::seed::derive_seed;
use crate::trace::{BestTracker, RunStatus, RunTrace, TraceRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct BoConfig {
    pub kernel: KernelKind,
    pub cond_max: f64,
    pub acquisition: AcquisitionConfig,
    pub n_close: usize,
    pub n_last: usize,
    pub trust_region: TrustRegionConfig,
    pub hp_search: HpSearchConfig,
    /// Treat gradients as noisy and fit their noise level.
    pub noisy: bool,
    /// Converged once the best-point gradient norm drops this many decades.
    pub optimality_orders: f64,
    /// Stalled after this many evaluations without a strict improvement.
    pub stall_limit: usize,
    /// Evaluation budget, counting the starting point.
    pub max_evals: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Gaussian,
            cond_max: DEFAULT_COND_MAX,
            acquisition: AcquisitionConfig::default(),
            n_close: 20,
            n_last: 3,
            trust_region: TrustRegionConfig::default(),
            hp_search: HpSearchConfig::default(),
            noisy: false,
            optimality_orders: 10.0,
            stall_limit: 20,
            max_evals: 300,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.trust_region.validate()?;
        self.hp_search.validate()?;
        if !(self.cond_max > 1.0) {
            return Err(GeboError::Config(format!("cond_max must exceed 1, got {}", self.cond_max)));
        }
        if self.n_close == 0 || self.max_evals == 0 || self.stall_limit == 0 {
            return Err(GeboError::Config("n_close, max_evals and stall_limit must be positive".into()));
        }
        if self.acquisition.n_lhs + self.acquisition.n_best == 0 {
            return Err(GeboError::Config("acquisition needs at least one start".into()));
        }
        if !(self.optimality_orders > 0.0) {
            return Err(GeboError::Config("optimality_orders must be positive".into()));
        }
        Ok(())
    }

    /// Likelihood settings with the noise mode implied by `noisy`.
    pub fn effective_hp_search(&self) -> HpSearchConfig {
        let mut hp = self.hp_search.clone();
        if self.noisy && hp.mode == NoiseMode::NoiseFree {
            hp.mode = NoiseMode::Noisy {
                values: false,
                gradients: true,
            };
        }
        hp
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Converged,
    Stalled,
    BudgetExhausted,
}

/// Applies the optimality, stall and budget rules to a trace.
pub fn stop_check(records: &[TraceRecord], cfg: &BoConfig) -> StopDecision {
    stop_rule(records, cfg.optimality_orders, cfg.stall_limit, cfg.max_evals)
}

pub(crate) fn stop_rule(records: &[TraceRecord], orders: f64, stall_limit: usize, max_evals: usize) -> StopDecision {
    let Some(last) = records.last() else {
        return StopDecision::Continue;
    };
    if records.len() > 1 && last.seen_ratio <= 10f64.powf(-orders) {
        return StopDecision::Converged;
    }
    let last_improvement = records
        .iter()
        .enumerate()
        .filter(|(i, r)| *i == 0 || r.f_best < records[i - 1].f_best)
        .map(|(i, _)| i)
        .last()
        .unwrap_or(0);
    if records.len() - 1 - last_improvement >= stall_limit {
        return StopDecision::Stalled;
    }
    if last.n_feval >= max_evals {
        return StopDecision::BudgetExhausted;
    }
    StopDecision::Continue
}

/// Everything the loop remembers between iterations.
struct History {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
    hp: Vec<Hyperparameters>,
    tr: TrustRegionState,
    /// Circular and σ constraint values of the latest point when it was chosen.
    last_g: (f64, f64),
    tracker: BestTracker,
}

/// Minimizes `problem` from the single starting point `x0`.
///
/// Oracle failures shrink the circular bound and retry once; a second
/// consecutive failure ends the run with [`RunStatus::Failed`] and the
/// partial trace.
pub fn run<P: Problem + ?Sized>(problem: &mut P, x0: &[f64], cfg: &BoConfig, seed: u64) -> Result<RunTrace> {
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(GeboError::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let start = Instant::now();
    let hp_cfg = cfg.effective_hp_search();
    let mut records: Vec<TraceRecord> = Vec::new();
    let first = match problem.evaluate(x0) {
        Ok(s) if s.value.is_finite() => s,
        Ok(_) => return Ok(failed(records, "objective is not finite at the starting point")),
        Err(e) => return Ok(failed(records, &e.to_string())),
    };
    let mut h = History {
        points: Vec::new(),
        values: Vec::new(),
        grads: Vec::new(),
        hp: Vec::new(),
        tr: TrustRegionState::initial(&cfg.trust_region),
        last_g: (0.0, 0.0),
        tracker: BestTracker::new(),
    };
    records.push(h.record(0, x0.to_vec(), first, None, start));

    let mut iter = 0;
    loop {
        match stop_check(&records, cfg) {
            StopDecision::Continue => {}
            StopDecision::Converged => return Ok(finish(records, RunStatus::Converged)),
            StopDecision::Stalled => return Ok(finish(records, RunStatus::Stalled)),
            StopDecision::BudgetExhausted => return Ok(finish(records, RunStatus::BudgetExhausted)),
        }
        iter += 1;
        let mut failures = 0;
        loop {
            let attempt_seed = derive_seed(seed, &[iter as u64, failures]);
            let (x, surrogate) = match h.propose(problem, cfg, &hp_cfg, failures > 0, attempt_seed) {
                Ok(v) => v,
                Err(e) => return Ok(failed(records, &e.to_string())),
            };
            match problem.evaluate(&x) {
                Ok(s) if s.value.is_finite() && s.gradient.iter().all(|g| g.is_finite()) => {
                    let x_best = &h.points[h.tracker.best_index];
                    let g_sigma = surrogate.variance_ratio(&x).unwrap_or(1.0);
                    h.last_g = (circular_tr_value(&x, x_best).0, g_sigma);
                    let hp = h.hp.last().cloned();
                    let tr = h.tr;
                    let mut rec = h.record(iter, x, s, hp, start);
                    rec.u_c = Some(tr.u_c);
                    rec.u_sigma = tr.u_sigma;
                    records.push(rec);
                    break;
                }
                outcome => {
                    failures += 1;
                    if failures >= 2 {
                        let why = match outcome {
                            Err(e) => e.to_string(),
                            Ok(_) => "objective or gradient not finite".into(),
                        };
                        return Ok(failed(records, &format!("two consecutive oracle failures: {why}")));
                    }
                    h.tr.u_c *= cfg.trust_region.rho_dec;
                }
            }
        }
    }
}

impl History {
    fn record(&mut self, iter: usize, x: Vec<f64>, s: Sample, hp: Option<Hyperparameters>, start: Instant) -> TraceRecord {
        let grad_norm = norm2(&s.gradient);
        let opt = norm2(s.reporting_gradient());
        let (f_best, opt_norm, opt_ratio, seen_ratio) = self.tracker.push(s.value, grad_norm, opt);
        self.points.push(x.clone());
        self.values.push(s.value);
        self.grads.push(s.gradient);
        TraceRecord {
            iter,
            n_feval: self.points.len(),
            x,
            f: s.value,
            grad_norm,
            f_best,
            opt_norm,
            opt_ratio,
            seen_ratio,
            u_c: None,
            u_sigma: None,
            hp,
            elapsed: start.elapsed().as_secs_f64(),
        }
    }

    /// Fits the local surrogate, updates the trust regions and minimizes the
    /// acquisition function. `retry` keeps the already shrunk bounds.
    fn propose<P: Problem + ?Sized>(
        &mut self,
        problem: &P,
        cfg: &BoConfig,
        hp_cfg: &HpSearchConfig,
        retry: bool,
        seed: u64,
    ) -> Result<(Vec<f64>, FittedSurrogate)> {
        let ib = self.tracker.best_index;
        let x_best = self.points[ib].clone();
        let region = select_data_region(&self.points, &x_best, cfg.n_close, cfg.n_last)?;
        let pts: Vec<Vec<f64>> = region.indices.iter().map(|&i| self.points[i].clone()).collect();
        let vals: Vec<f64> = region.indices.iter().map(|&i| self.values[i]).collect();
        let grads: Vec<Vec<f64>> = region.indices.iter().map(|&i| self.grads[i].clone()).collect();
        let data = DataSet::new(pts, &vals, &grads)?;

        if !retry {
            let sel = select_hyperparameters(&data, hp_cfg, cfg.kernel, cfg.cond_max, &self.hp, derive_seed(seed, &[1]))?;
            self.hp.push(sel.hp);
            self.tr = self.next_bounds(cfg, region.len(), region.radius);
        }
        let hp = self.hp.last().expect("hyperparameters selected").clone();
        let surrogate = fit_surrogate(&data, &hp, cfg.kernel, cfg.cond_max)?;

        let f_best = if hp.is_noisy() {
            let mut m = f64::INFINITY;
            for p in data.points() {
                m = m.min(surrogate.posterior_mean(p)?);
            }
            m
        } else {
            self.values[ib]
        };
        let region_points: Vec<(Vec<f64>, f64)> = data.points().iter().cloned().zip(vals).collect();
        let res = minimize_acquisition(
            &surrogate,
            &cfg.acquisition,
            &self.tr,
            &x_best,
            f_best,
            &region_points,
            problem.linear_constraints(),
            derive_seed(seed, &[2]),
        )?;
        Ok((res.x, surrogate))
    }

    fn next_bounds(&self, cfg: &BoConfig, n_data: usize, l_data: f64) -> TrustRegionState {
        let n = self.values.len();
        if n <= 1 {
            return TrustRegionState::initial(&cfg.trust_region);
        }
        let j_i = self.values[n - 1];
        let j_prev = (n >= 2).then(|| self.values[n - 2]);
        let j_best_prev = self.values[..n - 1].iter().copied().fold(f64::INFINITY, f64::min);
        let progress = classify_progress(j_i, j_prev, j_best_prev);
        let tr = &cfg.trust_region;
        TrustRegionState {
            u_c: update_circular_bound(tr, self.tr.u_c, progress, self.last_g.0, n_data, l_data),
            u_sigma: update_sigma_bound(tr, self.tr.u_sigma, progress, self.last_g.1, n_data),
        }
    }
}

fn finish(records: Vec<TraceRecord>, status: RunStatus) -> RunTrace {
    RunTrace { records, status }
}

fn failed(records: Vec<TraceRecord>, why: &str) -> RunTrace {
    RunTrace {
        records,
        status: RunStatus::Failed(why.to_string()),
    }
}
