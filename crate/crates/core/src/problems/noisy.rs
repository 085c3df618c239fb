//! Gradient noise wrapper.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::acquisition::LinearConstraint;
use crate::error::{GeboError, Result};
use crate::problems::{Problem, Sample};

/// Adds independent `Normal(0, σ²)` draws to every gradient component. The
/// objective is left untouched and the clean gradient is kept for reporting.
#[derive(Clone, Debug)]
pub struct NoisyGradient<P> {
    inner: P,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl<P: Problem> NoisyGradient<P> {
    pub fn new(inner: P, sigma: f64, seed: u64) -> Result<Self> {
        let noise = Normal::new(0.0, sigma).map_err(|_| GeboError::Config(format!("invalid gradient noise {sigma}")))?;
        Ok(Self {
            inner,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.noise.std_dev()
    }
}

impl<P: Problem> Problem for NoisyGradient<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Sample> {
        let clean = self.inner.evaluate(x)?;
        if self.sigma() == 0.0 {
            return Ok(clean);
        }
        let truth = clean.reporting_gradient().to_vec();
        let gradient = clean.gradient.iter().map(|g| g + self.noise.sample(&mut self.rng)).collect();
        Ok(Sample {
            value: clean.value,
            gradient,
            true_gradient: Some(truth),
        })
    }

    fn linear_constraints(&self) -> &[LinearConstraint] {
        self.inner.linear_constraints()
    }
}
