//! Bayesian optimization and BFGS on the 5-D Rosenbrock function from the
//! same Latin hypercube start.

use gebo::baseline::{bfgs_minimize, QnConfig};
use gebo::lhs::latin_hypercube;
use gebo::optimizer::{run, BoConfig};
use gebo::problems::{AnalyticKind, AnalyticProblem};
use gebo::trace::RunTrace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(name: &str, trace: &RunTrace) {
    println!("{name}: {}", trace.status.label());
    for r in trace.records.iter().step_by(10).chain(trace.last()) {
        println!("  eval {:4}  f_best {:10.3e}  optimality ratio {:9.2e}", r.n_feval, r.f_best, r.opt_ratio);
    }
}

fn main() -> gebo::Result<()> {
    let n = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = latin_hypercube(1, &vec![-10.0; n], &vec![10.0; n], &mut rng).remove(0);
    let kind = AnalyticKind::Rosenbrock { a: 100.0 };

    let mut problem = AnalyticProblem::new(kind, n)?;
    let bo = run(&mut problem, &x0, &BoConfig::default(), 1)?;
    show("bo", &bo);

    let mut problem = AnalyticProblem::new(kind, n)?;
    let qn = bfgs_minimize(&mut problem, &x0, &QnConfig::default())?;
    show("bfgs", &qn);
    Ok(())
}
