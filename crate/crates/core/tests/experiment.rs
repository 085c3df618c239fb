use std::path::Path;

use gebo::harness::{read_trace_csv, report_medians, run_experiment, ExperimentConfig, Method, SummaryRow, SUMMARY_FILE};
use gebo::problems::ProblemSpec;
use gebo::trace::RunStatus;

fn small(problem: &str, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ProblemSpec::parse(problem).unwrap());
    cfg.n_runs = 3;
    cfg.seed = 11;
    cfg.bo.max_evals = 40;
    cfg.qn.max_evals = 40;
    cfg.out_dir = Some(dir.to_path_buf());
    cfg
}

fn trace_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("trace_"))
        .collect();
    v.sort();
    v
}

#[test]
fn sweep_writes_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("bowl:3", dir.path());
    let results = run_experiment(&cfg).unwrap();
    assert_eq!(results.len(), 6);
    assert!(results.iter().all(|r| !matches!(r.trace.status, RunStatus::Failed(_))));

    let files = trace_files(dir.path());
    assert_eq!(files.len(), 6);
    for f in &files {
        let rows = read_trace_csv(f).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.windows(2).all(|w| w[1].f_best <= w[0].f_best), "{}", f.display());
        assert!(rows.windows(2).all(|w| w[1].n_feval > w[0].n_feval));
    }

    let written: Vec<SummaryRow> = csv::Reader::from_path(dir.path().join(SUMMARY_FILE))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(written.len(), 2);
    assert!(written.iter().all(|r| r.successes <= r.n_runs && r.n_runs == 3 && r.n_d == 3));
    let rebuilt = report_medians(dir.path(), cfg.f_tol, cfg.optimality_orders).unwrap();
    assert_eq!(rebuilt, written);
}

#[test]
fn starts_are_shared_between_methods() {
    let dir = tempfile::tempdir().unwrap();
    let results = run_experiment(&small("quad:2", dir.path())).unwrap();
    for run_id in 0..3 {
        let firsts: Vec<&Vec<f64>> = results
            .iter()
            .filter(|r| r.run_id == run_id)
            .map(|r| &r.trace.records[0].x)
            .collect();
        assert_eq!(firsts.len(), 2);
        assert_eq!(firsts[0], firsts[1]);
    }
    let mut starts: Vec<Vec<f64>> = results.iter().filter(|r| r.method == Method::Bo).map(|r| r.trace.records[0].x.clone()).collect();
    starts.dedup();
    assert_eq!(starts.len(), 3);
}

#[test]
fn noisy_runs_report_true_optimality() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("quad:3", dir.path());
    cfg.grad_noise = 1e-3;
    cfg.methods = vec![Method::Bo];
    let results = run_experiment(&cfg).unwrap();
    for r in &results {
        let last = r.trace.last().unwrap();
        assert!(last.opt_norm.is_finite());
        assert!(r.trace.records.iter().any(|t| t.hp.as_ref().is_some_and(|h| h.sigma_grad > 0.0)));
    }
}

#[test]
fn report_rejects_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(report_medians(dir.path(), 1e-5, 10.0).is_err());
}

#[test]
fn lorenz_runs_stay_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("lorenz:2", dir.path());
    cfg.n_runs = 2;
    cfg.bo.max_evals = 6;
    cfg.qn.max_evals = 6;
    let results = run_experiment(&cfg).unwrap();
    for r in &results {
        for t in &r.trace.records {
            assert!(-0.08 * t.x[0] + t.x[1] <= 0.6 + 1e-8, "{:?}", t.x);
        }
    }
}
