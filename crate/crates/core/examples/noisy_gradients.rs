//! Quadratic with Gaussian noise on every gradient entry. The noisy BO mode
//! estimates the noise level as a hyperparameter; BFGS has no such model.

use gebo::baseline::{bfgs_minimize, QnConfig};
use gebo::optimizer::{run, BoConfig};
use gebo::problems::{AnalyticKind, AnalyticProblem, NoisyGradient, Problem};
use gebo::trace::RunTrace;

fn true_optimality(trace: &RunTrace) -> f64 {
    trace.best().map_or(f64::NAN, |r| r.opt_norm)
}

fn main() -> gebo::Result<()> {
    let n = 5;
    let sigma = 1e-2;
    let x0 = vec![4.0, -3.0, 2.0, 7.0, -6.0];
    let quad = || AnalyticProblem::new(AnalyticKind::Quadratic, n);

    let mut problem = NoisyGradient::new(quad()?, sigma, 42)?;
    println!("clean gradient norm at start: {:.3e}", gebo::linalg::norm2(&quad()?.evaluate(&x0)?.gradient));

    let cfg = BoConfig { noisy: true, max_evals: 80, ..BoConfig::default() };
    let bo = run(&mut problem, &x0, &cfg, 5)?;
    let fitted = bo.records.iter().rev().find_map(|r| r.hp.as_ref());
    println!(
        "bo:   {} after {} evals, true optimality {:.3e}, estimated gradient noise {:.3e}",
        bo.status.label(),
        bo.records.len(),
        true_optimality(&bo),
        fitted.map_or(f64::NAN, |hp| hp.sigma_grad)
    );

    let mut problem = NoisyGradient::new(quad()?, sigma, 42)?;
    let qn = bfgs_minimize(&mut problem, &x0, &QnConfig { max_evals: 80, ..QnConfig::default() })?;
    println!(
        "bfgs: {} after {} evals, true optimality {:.3e}",
        qn.status.label(),
        qn.records.len(),
        true_optimality(&qn)
    );
    Ok(())
}
