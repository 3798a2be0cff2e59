use super::config::{Algorithm, Experiment, ExperimentConfig};
use super::{rms_error, run_rng};
use crate::error::{Error, Result};
use crate::features::HopWorldFeatures;
use crate::markov::{episode_steps, hopworld, sample_trajectory, true_hopworld_values, DEFAULT_MAX_TRAJECTORY};
use crate::predictors::{learn_episode, LstdLambda, RlsTdConfig, RlsTdLambda, TdLambda, ValueLearner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    /// 1-based.
    pub trial: usize,
    pub run: usize,
    pub lambda: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub config: ExperimentConfig,
    /// Ordered by λ, then run, then trial.
    pub rows: Vec<PredictionRow>,
}

impl PredictionResult {
    fn series(&self, lambda: f64) -> impl Iterator<Item = &PredictionRow> {
        self.rows.iter().filter(move |r| r.lambda == lambda)
    }

    /// RMS error after `trial` averaged over runs.
    pub fn mean_rms(&self, lambda: f64, trial: usize) -> Option<f64> {
        let v: Vec<f64> = self.series(lambda).filter(|r| r.trial == trial).map(|r| r.rms).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean RMS error over the first `window` trials, averaged over runs.
    pub fn window_mean(&self, lambda: f64, window: usize) -> Option<f64> {
        let v: Vec<f64> = self.series(lambda).filter(|r| r.trial <= window).map(|r| r.rms).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean RMS per trial, averaged over runs.
    pub fn mean_curve(&self, lambda: f64) -> Vec<f64> {
        (1..=self.config.trials).filter_map(|t| self.mean_rms(lambda, t)).collect()
    }
}

fn learner(cfg: &ExperimentConfig, lambda: f64) -> Result<Box<dyn ValueLearner>> {
    let dim = 4;
    Ok(match cfg.algorithm {
        Algorithm::TdLambda => Box::new(TdLambda::new(dim, cfg.schedule, cfg.gamma, lambda)),
        Algorithm::LstdLambda => Box::new(LstdLambda::new(dim, cfg.gamma, lambda, false)),
        Algorithm::RlsTdLambda => {
            let rls = RlsTdConfig { delta: cfg.delta, mu: cfg.mu, lambda, gamma: cfg.gamma };
            Box::new(RlsTdLambda::new(dim, rls)?)
        }
        other => return Err(Error::Config(format!("{other} is not a prediction algorithm"))),
    })
}

/// Hop-World learning curves: for each λ and run a fresh learner with zero
/// weights learns from one sampled episode per trial, and the RMS error over
/// the 13 states is recorded after each trial.
pub fn run_prediction_experiment(cfg: &ExperimentConfig) -> Result<PredictionResult> {
    cfg.validate()?;
    if cfg.experiment != Experiment::HopworldPrediction {
        return Err(Error::Config(format!("{:?} is not a prediction experiment", cfg.experiment)));
    }
    let chain = hopworld();
    let truth = true_hopworld_values();
    let mut rows = Vec::with_capacity(cfg.lambda_grid.len() * cfg.runs * cfg.trials);
    for &lambda in &cfg.lambda_grid {
        for run in 0..cfg.runs {
            let mut rng = run_rng(cfg.seed, run);
            let mut l = learner(cfg, lambda)?;
            for trial in 1..=cfg.trials {
                let episode = sample_trajectory(&chain, &mut rng, DEFAULT_MAX_TRAJECTORY)?;
                learn_episode(&mut l, &episode_steps(&chain, &episode, &HopWorldFeatures))?;
                let rms = rms_error(l.weights(), &HopWorldFeatures, &truth)?;
                rows.push(PredictionRow { trial, run, lambda, rms });
            }
        }
    }
    Ok(PredictionResult { config: cfg.clone(), rows })
}
