//! Seeded instance generators for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wop_core::DiscreteMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` atoms uniform in `[-1, 1]^dim` with random weights summing to `mass`.
pub fn uniform_cloud(rng: &mut impl Rng, dim: usize, n: usize, mass: f64) -> DiscreteMeasure {
    let points = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w * mass / s).collect();
    DiscreteMeasure::from_flat(dim, points, weights).expect("valid cloud")
}

/// `n` equal atoms drawn from an isotropic Gaussian.
pub fn gaussian_cloud(rng: &mut impl Rng, dim: usize, n: usize, mean: f64, sd: f64, mass: f64) -> DiscreteMeasure {
    let normal = Normal::new(mean, sd).expect("sd > 0");
    let points = (0..n * dim).map(|_| normal.sample(rng)).collect();
    DiscreteMeasure::from_flat(dim, points, vec![mass / n as f64; n]).expect("valid cloud")
}

/// A pair of clouds of the given sizes and masses.
pub fn pair(seed: u64, dim: usize, n: usize, masses: (f64, f64)) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut r = rng(seed);
    let mu = uniform_cloud(&mut r, dim, n, masses.0);
    let nu = uniform_cloud(&mut r, dim, n, masses.1);
    (mu, nu)
}
