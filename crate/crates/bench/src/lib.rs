//! Shared fixtures for the benchmarks.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A transition `(φ_t, φ_{t+1}, r)`.
pub type Sample = (DVector<f64>, DVector<f64>, f64);

/// Dense random transitions of dimension `dim`.
pub fn dense_samples(dim: usize, count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    (0..count)
        .map(|_| {
            let next = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            let s = (phi.clone(), next.clone(), rng.random_range(-1.0..1.0));
            phi = next;
            s
        })
        .collect()
}

/// Cart-pole-like observations spread over the CMAC input ranges.
pub fn observations(count: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            [
                rng.random_range(-0.2..0.2),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.4..2.4),
                rng.random_range(-2.0..2.0),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_chained() {
        let a = dense_samples(5, 10, 1);
        assert_eq!(a, dense_samples(5, 10, 1));
        assert!(a.windows(2).all(|w| w[0].1 == w[1].0));
        assert_eq!(observations(3, 2), observations(3, 2));
    }
}
