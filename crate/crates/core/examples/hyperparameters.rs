//! Maximum-likelihood hyperparameters for samples of a 2-D Rosenbrock
//! function, with the closed-form mean and signal variance.

use gebo::gp::{fit_surrogate, DataSet};
use gebo::kernels::KernelKind;
use gebo::lhs::latin_hypercube;
use gebo::likelihood::{select_hyperparameters, HpSearchConfig};
use gebo::problems::analytic::rosenbrock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gebo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points = latin_hypercube(12, &[-1.5, -0.5], &[1.5, 2.0], &mut rng);
    let (values, grads): (Vec<f64>, Vec<Vec<f64>>) = points.iter().map(|p| rosenbrock(p, 100.0)).unzip();
    let data = DataSet::new(points, &values, &grads)?;

    for kind in [KernelKind::Gaussian, KernelKind::RationalQuadratic { alpha: 1.0 }] {
        let sel = select_hyperparameters(&data, &HpSearchConfig::default(), kind, 1e10, &[], 11)?;
        let hp = &sel.hp;
        println!(
            "{:<10} log L {:10.3}  gamma [{:.3e}, {:.3e}]  sigma_K {:.3e}  beta {:.3e}  alpha {:?}",
            kind.name(),
            sel.log_likelihood,
            hp.gamma[0],
            hp.gamma[1],
            hp.sigma_k,
            hp.beta,
            hp.alpha
        );
        let gp = fit_surrogate(&data, hp, kind, 1e10)?;
        let x = [0.3, 0.4];
        let (truth, _) = rosenbrock(&x, 100.0);
        println!("           f(0.3, 0.4) = {truth:.4}, posterior mean {:.4}", gp.posterior_mean(&x)?);
    }
    Ok(())
}
