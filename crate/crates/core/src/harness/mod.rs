//! Seeded experiment runners and CSV output.
//!
//! Every run `r` draws from its own ChaCha8 stream keyed by
//! `(seed, r)`, so results are a pure function of the configuration and
//! different algorithms or λ values with the same run index see the same
//! random trajectories.

mod config;
mod control;
pub mod csv;
mod prediction;

pub use config::{
    Algorithm, ConfigOverrides, Experiment, ExperimentConfig, SCHEDULE_S1, SCHEDULE_S2, SCHEDULE_S3,
};
pub use control::{run_acrobot_experiment, run_cartpole_experiment, ControlResult, ControlRow, EpisodeSummary};
pub use prediction::{run_prediction_experiment, PredictionResult, PredictionRow};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Result};
use crate::features::{Featurizer, HopWorldFeatures};
use crate::markov::{error_bound_check, exact_fixed_point, hopworld, BoundCheck};

/// Random stream of run `run` under master seed `seed`.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Root-mean-square error of `φ(i)ᵀW` against `true_values` over all states.
pub fn rms_error<F: Featurizer<usize> + ?Sized>(w: &DVector<f64>, featurizer: &F, true_values: &[f64]) -> Result<f64> {
    check_dim(featurizer.dim(), w.len())?;
    let n = true_values.len();
    let sq: f64 = true_values
        .iter()
        .enumerate()
        .map(|(i, v)| (featurizer.features(&i).dot(w) - v).powi(2))
        .sum();
    Ok((sq / n as f64).sqrt())
}

/// Hop-World fixed point for each λ.
pub fn hopworld_oracle(lambdas: &[f64], gamma: f64) -> Result<Vec<(f64, DVector<f64>)>> {
    let chain = hopworld();
    lambdas
        .iter()
        .map(|&l| Ok((l, exact_fixed_point(&chain, &HopWorldFeatures, l, gamma)?)))
        .collect()
}

/// Error-bound check on Hop-World with its interpolating features for each λ.
pub fn hopworld_bound_table(lambdas: &[f64], gamma: f64) -> Result<Vec<(f64, BoundCheck)>> {
    let chain = hopworld();
    lambdas
        .iter()
        .map(|&l| Ok((l, error_bound_check(&chain, &HopWorldFeatures, l, gamma)?)))
        .collect()
}
