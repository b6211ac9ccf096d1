//! Thin wrappers over `rand_distr` that accept degenerate parameters.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

/// Poisson sampler that also allows a zero mean.
#[derive(Clone, Debug)]
pub struct PoissonSampler(Option<Poisson<f64>>);

impl PoissonSampler {
    pub fn new(lambda: f64) -> PoissonSampler {
        assert!(lambda >= 0.0 && lambda.is_finite(), "bad Poisson mean {lambda}");
        PoissonSampler(if lambda > 0.0 { Some(Poisson::new(lambda).expect("valid mean")) } else { None })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.0 {
            Some(d) => d.sample(rng) as u64,
            None => 0,
        }
    }
}

pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    PoissonSampler::new(lambda).sample(rng)
}

pub fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}
