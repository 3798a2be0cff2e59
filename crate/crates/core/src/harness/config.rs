use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::StepSizeSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    HopworldPrediction,
    CartpoleControl,
    AcrobotControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    TdLambda,
    LstdLambda,
    RlsTdLambda,
    /// Actor-critic with a TD(λ) critic.
    Ahc,
    /// Actor-critic with an RLS-TD(λ) critic.
    FastAhc,
    /// Actor-critic with an LS-TD(λ) critic.
    AhcLstd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::TdLambda,
        Algorithm::LstdLambda,
        Algorithm::RlsTdLambda,
        Algorithm::Ahc,
        Algorithm::FastAhc,
        Algorithm::AhcLstd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::TdLambda => "td_lambda",
            Algorithm::LstdLambda => "lstd_lambda",
            Algorithm::RlsTdLambda => "rls_td_lambda",
            Algorithm::Ahc => "ahc",
            Algorithm::FastAhc => "fast_ahc",
            Algorithm::AhcLstd => "ahc_lstd",
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, Algorithm::Ahc | Algorithm::FastAhc | Algorithm::AhcLstd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Step-size schedules (s1)–(s3) used for TD(λ) on Hop-World.
pub const SCHEDULE_S1: StepSizeSchedule = StepSizeSchedule::Decaying { alpha0: 0.01, n0: 1e6 };
pub const SCHEDULE_S2: StepSizeSchedule = StepSizeSchedule::Decaying { alpha0: 0.01, n0: 1000.0 };
pub const SCHEDULE_S3: StepSizeSchedule = StepSizeSchedule::Decaying { alpha0: 0.1, n0: 1000.0 };

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub algorithm: Algorithm,
    pub lambda_grid: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
    pub delta: f64,
    pub schedule: StepSizeSchedule,
    pub runs: usize,
    pub trials: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Trial window for the averaged prediction summary.
    pub window: usize,
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
    /// Actions are clamped to `[-action_bound, action_bound]`.
    pub action_bound: f64,
    /// Per-trial step cap: the success threshold on cart-pole, a runtime
    /// bound on acrobot.
    pub max_steps: usize,
    /// Step cap of the greedy acrobot test.
    pub eval_steps: usize,
    pub actor_warmup: u64,
    pub episodes_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
}

/// Config file contents and command-line overrides; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub experiment: Option<Experiment>,
    pub algorithm: Option<Algorithm>,
    pub lambda_grid: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub delta: Option<f64>,
    pub schedule: Option<StepSizeSchedule>,
    pub runs: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub window: Option<usize>,
    pub beta: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub action_bound: Option<f64>,
    pub max_steps: Option<usize>,
    pub eval_steps: Option<usize>,
    pub actor_warmup: Option<u64>,
    pub episodes_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            experiment, algorithm, lambda_grid, gamma, mu, delta, schedule, runs, trials, seed,
            output_path, window, beta, k1, k2, action_bound, max_steps, eval_steps, actor_warmup,
            episodes_path, trace_path
        )
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            algorithm: Algorithm::RlsTdLambda,
            lambda_grid: vec![0.3],
            gamma: 1.0,
            mu: 1.0,
            delta: 500.0,
            schedule: SCHEDULE_S1,
            runs: 20,
            trials: 200,
            seed: 0,
            output_path: None,
            window: 200,
            beta: 0.5,
            k1: 0.4,
            k2: 0.5,
            action_bound: 10.0,
            max_steps: 120_000,
            eval_steps: 2000,
            actor_warmup: 0,
            episodes_path: None,
            trace_path: None,
        };
        match experiment {
            Experiment::HopworldPrediction => base,
            Experiment::CartpoleControl => ExperimentConfig {
                algorithm: Algorithm::FastAhc,
                lambda_grid: vec![0.7],
                gamma: 0.95,
                delta: 0.1,
                schedule: StepSizeSchedule::Fixed { alpha: 0.1 },
                runs: 5,
                ..base
            },
            Experiment::AcrobotControl => ExperimentConfig {
                algorithm: Algorithm::FastAhc,
                lambda_grid: vec![0.6],
                gamma: 0.9,
                delta: 300.0,
                schedule: StepSizeSchedule::Fixed { alpha: 0.1 },
                runs: 5,
                trials: 50,
                beta: 0.2,
                action_bound: 3.0,
                max_steps: 30_000,
                ..base
            },
        }
    }

    /// Applies `overrides` on top of the defaults for its experiment (or
    /// `fallback` when the overrides name none) and validates the result.
    pub fn resolve(overrides: ConfigOverrides, fallback: Experiment) -> Result<Self> {
        let experiment = overrides.experiment.unwrap_or(fallback);
        let d = ExperimentConfig::defaults(experiment);
        let algorithm = overrides.algorithm.unwrap_or(d.algorithm);
        let default_warmup = if algorithm == Algorithm::AhcLstd { 60 } else { 0 };
        let cfg = ExperimentConfig {
            experiment,
            algorithm,
            lambda_grid: overrides.lambda_grid.unwrap_or(d.lambda_grid),
            gamma: overrides.gamma.unwrap_or(d.gamma),
            mu: overrides.mu.unwrap_or(d.mu),
            delta: overrides.delta.unwrap_or(d.delta),
            schedule: overrides.schedule.unwrap_or(d.schedule),
            runs: overrides.runs.unwrap_or(d.runs),
            trials: overrides.trials.unwrap_or(d.trials),
            seed: overrides.seed.unwrap_or(d.seed),
            output_path: overrides.output_path.or(d.output_path),
            window: overrides.window.unwrap_or(d.window),
            beta: overrides.beta.unwrap_or(d.beta),
            k1: overrides.k1.unwrap_or(d.k1),
            k2: overrides.k2.unwrap_or(d.k2),
            action_bound: overrides.action_bound.unwrap_or(d.action_bound),
            max_steps: overrides.max_steps.unwrap_or(d.max_steps),
            eval_steps: overrides.eval_steps.unwrap_or(d.eval_steps),
            actor_warmup: overrides.actor_warmup.unwrap_or(default_warmup),
            episodes_path: overrides.episodes_path.or(d.episodes_path),
            trace_path: overrides.trace_path.or(d.trace_path),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let control = self.experiment != Experiment::HopworldPrediction;
        if control != self.algorithm.is_control() {
            return fail(format!("algorithm {} does not apply to {:?}", self.algorithm, self.experiment));
        }
        if self.lambda_grid.is_empty() {
            return fail("lambda_grid is empty".into());
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return fail(format!("lambda {l} outside [0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return fail(format!("mu {} outside (0, 1]", self.mu));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return fail(format!("delta {} must be positive", self.delta));
        }
        if !self.schedule.is_valid() {
            return fail(format!("invalid step-size schedule {:?}", self.schedule));
        }
        if self.runs == 0 || self.trials == 0 || self.window == 0 {
            return fail("runs, trials and window must be at least 1".into());
        }
        if control {
            if self.max_steps == 0 || self.eval_steps == 0 {
                return fail("max_steps and eval_steps must be at least 1".into());
            }
            let positive = |x: f64| x > 0.0 && x.is_finite();
            if !(self.beta >= 0.0 && self.beta.is_finite()) || !positive(self.k1) || !positive(self.k2) {
                return fail("beta must be non-negative, k1 and k2 positive".into());
            }
            if !positive(self.action_bound) {
                return fail(format!("action_bound {} must be positive", self.action_bound));
            }
        }
        Ok(())
    }
}
