//! A small experiment sweep through the harness: Latin hypercube starts,
//! both optimizers, CSV output and the summary table rebuilt from traces.

use gebo::harness::{report_medians, run_experiment, ExperimentConfig, Method};
use gebo::problems::ProblemSpec;

fn main() -> gebo::Result<()> {
    let out = std::env::temp_dir().join("gebo-example-experiment");
    let mut cfg = ExperimentConfig::new(ProblemSpec::parse("bowl:4")?);
    cfg.methods = vec![Method::Bo, Method::Bfgs];
    cfg.n_runs = 3;
    cfg.seed = 7;
    cfg.out_dir = Some(out.clone());

    for r in run_experiment(&cfg)? {
        println!(
            "{:<4} run {}  {:<10} {:4} evals  f_best {:.3e}",
            r.method.name(),
            r.run_id,
            r.trace.status.label(),
            r.trace.records.len(),
            r.trace.final_f_best()
        );
    }
    for row in report_medians(&out, cfg.f_tol, cfg.optimality_orders)? {
        println!("{} on {}: {}/{} succeeded, median evals {}", row.method, row.problem, row.successes, row.n_runs, row.median_evals);
    }
    println!("CSVs in {}", out.display());
    Ok(())
}
