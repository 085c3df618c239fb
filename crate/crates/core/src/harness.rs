//! Multi-run experiments with CSV output and iterations-to-tolerance summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::LinearConstraint;
use crate::baseline::{bfgs_minimize, QnConfig};
use crate::error::{GeboError, Result};
use crate::lhs::latin_hypercube;
use crate::linalg::dot;
use crate::optimizer::{run, BoConfig};
use crate::problems::ProblemSpec;
use crate::seed::{derive_seed, label_hash};
use crate::trace::{RunStatus, RunTrace};

pub const TRACE_PREFIX: &str = "trace_";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNS_FILE: &str = "runs.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Bo,
    Bfgs,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bo" => Ok(Self::Bo),
            "bfgs" => Ok(Self::Bfgs),
            other => Err(GeboError::Config(format!("unknown method '{other}' (expected bo or bfgs)"))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let m = Self::parse(part)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(GeboError::Config("no methods given".into()));
        }
        Ok(out)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bo => "bo",
            Self::Bfgs => "bfgs",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub n_runs: usize,
    /// Start box; `None` uses the problem's default.
    pub start_box: Option<(Vec<f64>, Vec<f64>)>,
    pub seed: u64,
    /// Standard deviation of the gradient noise, 0 for exact gradients.
    pub grad_noise: f64,
    /// Objective tolerance for the summary.
    pub f_tol: f64,
    /// Required decades of optimality reduction for the summary.
    pub optimality_orders: f64,
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
    pub bo: BoConfig,
    pub qn: QnConfig,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        Self {
            problem,
            methods: vec![Method::Bo, Method::Bfgs],
            n_runs: 5,
            start_box: None,
            seed: 0,
            grad_noise: 0.0,
            f_tol: 1e-5,
            optimality_orders: 10.0,
            out_dir: None,
            workers: 1,
            bo: BoConfig::default(),
            qn: QnConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.bo.validate()?;
        self.qn.validate()?;
        if self.n_runs == 0 || self.methods.is_empty() {
            return Err(GeboError::Config("need at least one run and one method".into()));
        }
        let (lo, hi) = self.bounds();
        if lo.len() != self.problem.dim() || hi.len() != self.problem.dim() {
            return Err(GeboError::Config("start box dimension does not match the problem".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return Err(GeboError::Config("start box bounds must be finite with lower <= upper".into()));
        }
        if !(self.grad_noise >= 0.0) {
            return Err(GeboError::Config("gradient noise must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.start_box.clone().unwrap_or_else(|| self.problem.start_box())
    }

    /// Seed of one run: `derive_seed(master, [run_id, fnv1a(method)])`.
    pub fn run_seed(&self, run_id: usize, method: Method) -> u64 {
        derive_seed(self.seed, &[run_id as u64, label_hash(method.name())])
    }

    /// Gradient-noise seed of one run, shared by all methods.
    pub fn noise_seed(&self, run_id: usize) -> u64 {
        derive_seed(self.seed, &[run_id as u64, label_hash("noise")])
    }
}

/// Latin hypercube starting points, moved onto the feasible side of any
/// violated linear constraint.
pub fn starting_points(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = cfg.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[label_hash("starts")]));
    let mut pts = latin_hypercube(cfg.n_runs, &lo, &hi, &mut rng);
    let constraints = cfg.problem.build(0.0, 0)?.linear_constraints().to_vec();
    for p in pts.iter_mut() {
        make_feasible(p, &constraints);
    }
    Ok(pts)
}

fn make_feasible(x: &mut [f64], constraints: &[LinearConstraint]) {
    for c in constraints {
        let v = c.violation(x);
        if v > 0.0 {
            let nn = dot(&c.coeffs, &c.coeffs);
            // land slightly inside the half-space
            let shift = (v + 1e-6 * c.bound.abs().max(1.0)) / nn;
            x.iter_mut().zip(&c.coeffs).for_each(|(xi, a)| *xi -= shift * a);
        }
    }
}

/// One finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub run_id: usize,
    pub method: Method,
    pub trace: RunTrace,
}

/// Runs one method from one start.
pub fn run_single(cfg: &ExperimentConfig, run_id: usize, method: Method, x0: &[f64]) -> Result<RunTrace> {
    let mut problem = cfg.problem.build(cfg.grad_noise, cfg.noise_seed(run_id))?;
    match method {
        Method::Bo => {
            let mut bo = cfg.bo.clone();
            bo.noisy |= cfg.grad_noise > 0.0 || matches!(cfg.problem, ProblemSpec::Lorenz { .. });
            run(&mut problem, x0, &bo, cfg.run_seed(run_id, method))
        }
        Method::Bfgs => bfgs_minimize(&mut problem, x0, &cfg.qn),
    }
}

/// Runs every method from every start, writing CSVs when `out_dir` is set.
/// Individual run failures are recorded in the run status and never stop the
/// sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let starts = starting_points(cfg)?;
    let jobs: Vec<(usize, Method)> = (0..cfg.n_runs).flat_map(|r| cfg.methods.iter().map(move |m| (r, *m))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<RunResult>> = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(run_id, method)) = jobs.get(k) else {
                    break;
                };
                let trace = run_single(cfg, run_id, method, &starts[run_id]).unwrap_or_else(|e| RunTrace {
                    records: Vec::new(),
                    status: RunStatus::Failed(e.to_string()),
                });
                results.lock().expect("no worker panicked").push(RunResult { run_id, method, trace });
            });
        }
    });
    let mut results = results.into_inner().expect("no worker panicked");
    results.sort_by_key(|r| (r.method, r.run_id));
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, cfg, &results)?;
    }
    Ok(results)
}

/// One row of a trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: usize,
    pub method: String,
    pub iter: usize,
    pub n_feval: usize,
    pub f: f64,
    pub f_best: f64,
    pub opt_norm: f64,
    pub opt_ratio: f64,
    pub u_c: Option<f64>,
    pub u_sigma: Option<f64>,
}

pub fn trace_rows(run_id: usize, method: Method, trace: &RunTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            run_id,
            method: method.name().to_string(),
            iter: r.iter,
            n_feval: r.n_feval,
            f: r.f,
            f_best: r.f_best,
            opt_norm: r.opt_norm,
            opt_ratio: r.opt_ratio,
            u_c: r.u_c,
            u_sigma: r.u_sigma,
        })
        .collect()
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["run_id", "method", "iter", "n_feval", "f", "f_best", "opt_norm", "opt_ratio", "u_c", "u_sigma"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(GeboError::from)).collect()
}

/// Final state of one run, written to `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub method: String,
    pub status: String,
    pub n_feval: usize,
    pub f_best: f64,
    pub opt_norm: f64,
    pub opt_ratio: f64,
    pub detail: String,
}

/// Per-method row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub problem: String,
    pub n_d: usize,
    pub n_runs: usize,
    pub successes: usize,
    /// Median evaluations to tolerance, or `not achieved`.
    pub median_evals: String,
}

/// Median of evaluations-to-tolerance where `None` counts as infinity;
/// `None` when fewer than half the runs achieve the tolerance.
pub fn median_evals(evals: &[Option<usize>]) -> Option<f64> {
    let n = evals.len();
    let achieved = evals.iter().filter(|e| e.is_some()).count();
    if n == 0 || 2 * achieved < n {
        return None;
    }
    let mut v: Vec<f64> = evals.iter().map(|e| e.map_or(f64::INFINITY, |k| k as f64)).collect();
    v.sort_by(f64::total_cmp);
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    m.is_finite().then_some(m)
}

/// First evaluation count meeting both tolerances in a persisted trace.
pub fn rows_to_tolerance(rows: &[TraceRow], f_tol: f64, ratio_tol: f64) -> Option<usize> {
    rows.iter().find(|r| r.f_best <= f_tol && r.opt_ratio <= ratio_tol).map(|r| r.n_feval)
}

/// Summary rows grouped by method from persisted traces.
pub fn summarize(problem: &str, n_d: usize, traces: &[(String, Vec<TraceRow>)], f_tol: f64, orders: f64) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = traces.iter().map(|(m, _)| m.as_str()).collect();
    methods.sort();
    methods.dedup();
    let ratio_tol = 10f64.powf(-orders);
    methods
        .into_iter()
        .map(|m| {
            let evals: Vec<Option<usize>> = traces
                .iter()
                .filter(|(mm, _)| mm == m)
                .map(|(_, rows)| rows_to_tolerance(rows, f_tol, ratio_tol))
                .collect();
            SummaryRow {
                method: m.to_string(),
                problem: problem.to_string(),
                n_d,
                n_runs: evals.len(),
                successes: evals.iter().filter(|e| e.is_some()).count(),
                median_evals: median_evals(&evals).map_or_else(|| "not achieved".to_string(), |v| v.to_string()),
            }
        })
        .collect()
}

fn trace_file_name(method: Method, run_id: usize) -> String {
    format!("{TRACE_PREFIX}{}_{run_id:03}.csv", method.name())
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, results: &[RunResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut persisted = Vec::new();
    let mut runs = csv::Writer::from_path(dir.join(RUNS_FILE))?;
    for r in results {
        let rows = trace_rows(r.run_id, r.method, &r.trace);
        write_trace_csv(&dir.join(trace_file_name(r.method, r.run_id)), &rows)?;
        let last = r.trace.last();
        runs.serialize(RunRow {
            run_id: r.run_id,
            method: r.method.name().to_string(),
            status: r.trace.status.label().to_string(),
            n_feval: last.map_or(0, |l| l.n_feval),
            f_best: r.trace.final_f_best(),
            opt_norm: r.trace.final_opt_norm(),
            opt_ratio: last.map_or(f64::INFINITY, |l| l.opt_ratio),
            detail: match &r.trace.status {
                RunStatus::Failed(why) => why.clone(),
                _ => String::new(),
            },
        })?;
        persisted.push((r.method.name().to_string(), rows));
    }
    runs.flush()?;
    let summary = summarize(&cfg.problem.name(), cfg.problem.dim(), &persisted, cfg.f_tol, cfg.optimality_orders);
    write_summary(&dir.join(SUMMARY_FILE), &summary)
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds the summary from the trace files in `dir`. The problem name and
/// dimension come from the existing summary when present.
pub fn report_medians(dir: &Path, f_tol: f64, orders: f64) -> Result<Vec<SummaryRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(TRACE_PREFIX) && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(GeboError::Empty(format!("no trace files in {}", dir.display())));
    }
    let mut traces = Vec::new();
    for f in &files {
        let rows = read_trace_csv(f)?;
        let method = match rows.first() {
            Some(r) => r.method.clone(),
            None => {
                let name = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                name.trim_start_matches(TRACE_PREFIX).split('_').next().unwrap_or_default().to_string()
            }
        };
        traces.push((method, rows));
    }
    let (problem, n_d) = match csv::Reader::from_path(dir.join(SUMMARY_FILE)) {
        Ok(mut r) => match r.deserialize::<SummaryRow>().next() {
            Some(Ok(row)) => (row.problem, row.n_d),
            _ => (String::from("unknown"), 0),
        },
        Err(_) => (String::from("unknown"), 0),
    };
    Ok(summarize(&problem, n_d, &traces, f_tol, orders))
}
