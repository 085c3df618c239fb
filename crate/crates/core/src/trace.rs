//! Per-evaluation run history shared by every optimizer.

use crate::gp::Hyperparameters;

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Converged,
    Stalled,
    BudgetExhausted,
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> &str {
        match self {
            Self::Converged => "converged",
            Self::Stalled => "stalled",
            Self::BudgetExhausted => "budget_exhausted",
            Self::Failed(_) => "failed",
        }
    }
}

/// One objective-and-gradient evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Outer iteration that produced the evaluation.
    pub iter: usize,
    /// Evaluations so far, counting this one.
    pub n_feval: usize,
    pub x: Vec<f64>,
    pub f: f64,
    /// Norm of the gradient the optimizer saw at `x`.
    pub grad_norm: f64,
    pub f_best: f64,
    /// Norm of the reporting (noise-free) gradient at the best point.
    pub opt_norm: f64,
    /// `opt_norm` relative to its value at the first point.
    pub opt_ratio: f64,
    /// Same ratio computed from the gradients the optimizer saw.
    pub seen_ratio: f64,
    pub u_c: Option<f64>,
    pub u_sigma: Option<f64>,
    pub hp: Option<Hyperparameters>,
    /// Seconds since the run started. Not part of any persisted output.
    pub elapsed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
}

impl RunTrace {
    pub fn best(&self) -> Option<&TraceRecord> {
        self.records.iter().min_by(|a, b| a.f.total_cmp(&b.f))
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_f_best(&self) -> f64 {
        self.last().map_or(f64::INFINITY, |r| r.f_best)
    }

    pub fn final_opt_norm(&self) -> f64 {
        self.last().map_or(f64::INFINITY, |r| r.opt_norm)
    }

    /// First evaluation count at which both `f_best ≤ f_tol` and
    /// `opt_ratio ≤ ratio_tol` hold.
    pub fn evals_to_tolerance(&self, f_tol: f64, ratio_tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.f_best <= f_tol && r.opt_ratio <= ratio_tol)
            .map(|r| r.n_feval)
    }
}

/// Running best-point bookkeeping used while building a trace.
#[derive(Clone, Debug)]
pub(crate) struct BestTracker {
    pub f_best: f64,
    pub best_index: usize,
    opt_norm: f64,
    seen_norm: f64,
    first_opt: f64,
    first_seen: f64,
    count: usize,
}

impl BestTracker {
    pub fn new() -> Self {
        Self {
            f_best: f64::INFINITY,
            best_index: 0,
            opt_norm: f64::INFINITY,
            seen_norm: f64::INFINITY,
            first_opt: f64::NAN,
            first_seen: f64::NAN,
            count: 0,
        }
    }

    /// Registers an evaluation; returns `(f_best, opt_norm, opt_ratio, seen_ratio)`.
    pub fn push(&mut self, f: f64, seen_norm: f64, opt_norm: f64) -> (f64, f64, f64, f64) {
        if self.count == 0 {
            self.first_opt = opt_norm;
            self.first_seen = seen_norm;
        }
        if f < self.f_best {
            self.f_best = f;
            self.best_index = self.count;
            self.opt_norm = opt_norm;
            self.seen_norm = seen_norm;
        }
        self.count += 1;
        (self.f_best, self.opt_norm, ratio(self.opt_norm, self.first_opt), ratio(self.seen_norm, self.first_seen))
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
