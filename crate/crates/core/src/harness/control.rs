use rand::Rng;

use super::config::{Algorithm, Experiment, ExperimentConfig};
use super::run_rng;
use crate::actor_critic::{
    greedy_rollout, Actor, ActorConfig, ActorCritic, AcrobotPlant, CartPolePlant, Critic, CriticKind,
    EpisodeOptions, StepRecord, Termination,
};
use crate::dynamics::{AcrobotParams, CartPoleParams};
use crate::error::{Error, Result};
use crate::features::{Cmac, CmacConfig, Featurizer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub terminated_by: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRow {
    pub run: usize,
    pub lambda: f64,
    /// Cart-pole: trials until a trial reaches the step cap, or the trial
    /// cap when none does. Acrobot: greedy steps to the goal, or the
    /// evaluation cap.
    pub metric: f64,
    pub terminated_by: Termination,
    /// One entry per learning trial.
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    pub config: ExperimentConfig,
    /// Ordered by λ, then run.
    pub rows: Vec<ControlRow>,
    /// Step log of the first successful run (the balancing trial, or the
    /// greedy swing-up), kept when `trace_path` is set.
    pub trace: Option<Vec<StepRecord>>,
}

impl ControlResult {
    pub fn metrics(&self, lambda: f64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.lambda == lambda).map(|r| r.metric).collect()
    }

    pub fn successes(&self, lambda: f64, success: Termination) -> usize {
        self.rows.iter().filter(|r| r.lambda == lambda && r.terminated_by == success).count()
    }
}

fn critic_kind(cfg: &ExperimentConfig) -> Result<CriticKind> {
    Ok(match cfg.algorithm {
        Algorithm::Ahc => CriticKind::Td { schedule: cfg.schedule },
        Algorithm::FastAhc => CriticKind::Rls { delta: cfg.delta, mu: cfg.mu },
        Algorithm::AhcLstd => CriticKind::Lstd,
        other => return Err(Error::Config(format!("{other} is not a control algorithm"))),
    })
}

fn build_agent<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    lambda: f64,
    actor_cmac: CmacConfig,
    critic_cmac: CmacConfig,
    rng: &mut R,
) -> Result<ActorCritic> {
    let actor_features = Cmac::new(actor_cmac)?;
    let actor_cfg = ActorConfig {
        beta: cfg.beta,
        k1: cfg.k1,
        k2: cfg.k2,
        action_bounds: [-cfg.action_bound, cfg.action_bound],
    };
    let actor = Actor::new(actor_features.dim(), actor_cfg, rng)?;
    let critic = Critic::new(critic_kind(cfg)?, Cmac::new(critic_cmac)?, cfg.gamma, lambda)?;
    ActorCritic::new(actor, actor_features, critic)
}

fn check_experiment(cfg: &ExperimentConfig, expected: Experiment) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != expected {
        return Err(Error::Config(format!("expected a {expected:?} config, got {:?}", cfg.experiment)));
    }
    Ok(())
}

/// Cart-pole balancing: each run learns for up to `trials` trials and
/// stops at the first trial that survives `max_steps` steps.
pub fn run_cartpole_experiment(cfg: &ExperimentConfig) -> Result<ControlResult> {
    check_experiment(cfg, Experiment::CartpoleControl)?;
    let want_trace = cfg.trace_path.is_some();
    let mut rows = Vec::new();
    let mut trace = None;
    for &lambda in &cfg.lambda_grid {
        for run in 0..cfg.runs {
            let mut rng = run_rng(cfg.seed, run);
            let mut agent =
                build_agent(cfg, lambda, CmacConfig::cartpole_actor(), CmacConfig::cartpole_critic(), &mut rng)?;
            let mut plant = CartPolePlant::new(CartPoleParams::default());
            let opts = EpisodeOptions {
                max_steps: cfg.max_steps,
                learn_actor: true,
                learn_critic: true,
                actor_warmup: cfg.actor_warmup,
                log: want_trace && trace.is_none(),
            };
            let mut episodes = Vec::new();
            let mut metric = cfg.trials as f64;
            let mut terminated_by = Termination::Failure;
            for trial in 1..=cfg.trials {
                let out = agent.run_episode(&mut plant, &mut rng, &opts)?;
                episodes.push(EpisodeSummary { steps: out.steps, terminated_by: out.terminated_by });
                if out.terminated_by == Termination::SuccessCap {
                    metric = trial as f64;
                    terminated_by = Termination::SuccessCap;
                    if opts.log {
                        trace = Some(out.log);
                    }
                    break;
                }
            }
            rows.push(ControlRow { run, lambda, metric, terminated_by, episodes });
        }
    }
    Ok(ControlResult { config: cfg.clone(), rows, trace })
}

/// Acrobot swing-up: `trials` learning trials from the hanging rest state,
/// then a greedy test of the actor alone.
pub fn run_acrobot_experiment(cfg: &ExperimentConfig) -> Result<ControlResult> {
    check_experiment(cfg, Experiment::AcrobotControl)?;
    let want_trace = cfg.trace_path.is_some();
    let mut rows = Vec::new();
    let mut trace = None;
    for &lambda in &cfg.lambda_grid {
        for run in 0..cfg.runs {
            let mut rng = run_rng(cfg.seed, run);
            let mut agent =
                build_agent(cfg, lambda, CmacConfig::acrobot_actor(), CmacConfig::acrobot_critic(), &mut rng)?;
            let mut plant = AcrobotPlant::new(AcrobotParams::default());
            let opts = EpisodeOptions {
                max_steps: cfg.max_steps,
                learn_actor: true,
                learn_critic: true,
                actor_warmup: cfg.actor_warmup,
                log: false,
            };
            let mut episodes = Vec::with_capacity(cfg.trials);
            for _ in 0..cfg.trials {
                let out = agent.run_episode(&mut plant, &mut rng, &opts)?;
                episodes.push(EpisodeSummary { steps: out.steps, terminated_by: out.terminated_by });
            }
            let log = want_trace && trace.is_none();
            let test = greedy_rollout(&agent.actor, &agent.actor_features, &mut plant, &mut rng, cfg.eval_steps, log)?;
            if log && test.terminated_by == Termination::Goal {
                trace = Some(test.log);
            }
            rows.push(ControlRow {
                run,
                lambda,
                metric: test.steps as f64,
                terminated_by: test.terminated_by,
                episodes,
            });
        }
    }
    Ok(ControlResult { config: cfg.clone(), rows, trace })
}
