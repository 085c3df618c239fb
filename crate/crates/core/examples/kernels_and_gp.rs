//! Fit a gradient-enhanced GP to a few samples of a 1-D function and compare
//! the posterior with the truth. The second half repeats one point to show the
//! nugget keeping the factorization well conditioned.

use gebo::gp::{fit_surrogate, DataSet, Hyperparameters};
use gebo::kernels::{kernel_value, KernelKind};

fn f(x: f64) -> (f64, f64) {
    (x.sin() + 0.1 * x * x, x.cos() + 0.2 * x)
}

fn main() -> gebo::Result<()> {
    for kind in [KernelKind::Gaussian, KernelKind::MaternPrinted, KernelKind::RationalQuadratic { alpha: 2.0 }] {
        let k: Vec<String> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|r| format!("{:.4}", kernel_value(kind, &[0.0], &[*r], &[1.0]).unwrap()))
            .collect();
        println!("{:<12} k(0, r) for r = 0, 0.5, 1, 2: {}", kind.name(), k.join(" "));
    }

    let xs = [-2.0, -0.5, 1.0, 2.5];
    let points: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
    let values: Vec<f64> = xs.iter().map(|x| f(*x).0).collect();
    let grads: Vec<Vec<f64>> = xs.iter().map(|x| vec![f(*x).1]).collect();
    let data = DataSet::new(points, &values, &grads)?;
    let hp = Hyperparameters::noise_free(vec![0.5], 1.0, 0.0);
    let gp = fit_surrogate(&data, &hp, KernelKind::Gaussian, 1e10)?;

    println!("\n    x      truth       mean     dmean/dx   var ratio");
    for i in 0..=10 {
        let x = -2.5 + 0.5 * i as f64;
        let p = gp.evaluate(&[x], true)?;
        println!("{x:5.2} {:10.5} {:10.5} {:10.5} {:11.3e}", f(x).0, p.mean, p.mean_grad[0], p.ratio);
    }

    // an exact duplicate makes the raw covariance singular
    let dup = vec![vec![0.3], vec![0.3], vec![1.1]];
    let values: Vec<f64> = dup.iter().map(|x| f(x[0]).0).collect();
    let grads: Vec<Vec<f64>> = dup.iter().map(|x| vec![f(x[0]).1]).collect();
    let data = DataSet::new(dup, &values, &grads)?;
    let gp = fit_surrogate(&data, &hp, KernelKind::Gaussian, 1e10)?;
    println!("\nduplicate point: nugget {:.3e}, mean at 0.3 = {:.8} (truth {:.8})", gp.nugget(), gp.posterior_mean(&[0.3])?, f(0.3).0);
    Ok(())
}
