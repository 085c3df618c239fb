//! Tangent growth on the Lorenz-63 attractor with and without energy
//! clipping, and the clipped sensitivity of the time-averaged objective.

use gebo::problems::{LorenzConfig, LorenzProblem};

fn main() -> gebo::Result<()> {
    let lorenz = LorenzProblem::new(LorenzConfig::default())?;
    let (rho, beta) = (28.0, 8.0 / 3.0);
    let v0 = [1.0 / 3f64.sqrt(); 3];
    let raw = lorenz.tangent_norms(rho, beta, v0, 30.0, false)?;
    let clipped = lorenz.tangent_norms(rho, beta, v0, 30.0, true)?;
    println!("   t     |v| raw     |v| clipped");
    for k in (0..raw.len()).step_by(300) {
        println!("{:5.1} {:12.4e} {:12.4e}", k as f64 * 0.01, raw[k], clipped[k]);
    }

    for (rho, beta) in [(28.0, 8.0 / 3.0), (35.0, 1.0), (30.0, 3.0)] {
        let e = lorenz.evaluate_with_gradient(rho, beta)?;
        println!(
            "J({rho:.1}, {beta:.3}) = {:8.3}  dJ/drho {:8.4}  dJ/dbeta {:9.4}",
            e.value, e.gradient[0], e.gradient[1]
        );
    }
    Ok(())
}
