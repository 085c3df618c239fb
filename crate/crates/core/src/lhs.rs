//! Latin hypercube sampling.

use rand::seq::SliceRandom;
use rand::Rng;

/// Draws `n` samples in the box `[lower, upper]`.
///
/// Each coordinate range is split into `n` equal bins and every bin receives
/// exactly one sample; bins are paired across coordinates by independent
/// random permutations.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    assert_eq!(lower.len(), upper.len(), "bounds must have equal length");
    let dim = lower.len();
    let mut samples = vec![vec![0.0; dim]; n];
    let mut bins: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        bins.shuffle(rng);
        let width = (upper[d] - lower[d]) / n as f64;
        for (sample, &bin) in samples.iter_mut().zip(&bins) {
            let u: f64 = rng.gen();
            sample[d] = (lower[d] + (bin as f64 + u) * width).min(upper[d]);
        }
    }
    samples
}

/// Bin index of `v` within `[lo, hi]` split into `n` bins.
pub fn bin_index(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let t = ((v - lo) / (hi - lo) * n as f64).floor();
    (t.max(0.0) as usize).min(n - 1)
}
