//! Adaptive heuristic critic: a linear Gaussian actor driven by the TD error
//! of a pluggable linear critic.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    acrobot_control_step, acrobot_goal_reached, cartpole_step, AcrobotParams, AcrobotState,
    CartPoleParams, CartPoleState,
};
use crate::error::{check_dim, Error, Result};
use crate::features::{Cmac, Featurizer};
use crate::predictors::{LstdLambda, RlsTdConfig, RlsTdLambda, StepSizeSchedule, TdLambda, ValueLearner};

/// `σ = k1 / (1 + exp(k2 V))`.
pub fn action_variance(value: f64, k1: f64, k2: f64) -> f64 {
    k1 / (1.0 + (k2 * value).exp())
}

/// Normal draw with standard deviation `σ/√2`, i.e. density
/// `∝ exp(−(y−ȳ)²/σ²)`. Not clamped.
pub fn gaussian_draw<R: Rng + ?Sized>(mean: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma <= 0.0 || !sigma.is_finite() {
        return mean;
    }
    Normal::new(mean, sigma / std::f64::consts::SQRT_2)
        .expect("positive finite deviation")
        .sample(rng)
}

/// [`gaussian_draw`] clamped to `bounds`.
pub fn sample_action<R: Rng + ?Sized>(mean: f64, sigma: f64, bounds: [f64; 2], rng: &mut R) -> f64 {
    gaussian_draw(mean, sigma, rng).clamp(bounds[0], bounds[1])
}

/// `r̂ = r + γ V(s') − V(s)`; pass `v_next = 0` on terminal transitions.
pub fn internal_reward(reward: f64, v_next: f64, v_now: f64, gamma: f64) -> f64 {
    reward + gamma * v_next - v_now
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
    pub action_bounds: [f64; 2],
}

impl ActorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta >= 0.0
            && self.k1 > 0.0
            && self.k2 > 0.0
            && self.action_bounds[0] < self.action_bounds[1]
            && [self.beta, self.k1, self.k2].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid actor parameters {self:?}")))
        }
    }
}

/// Linear actor `ȳ = uᵀφ(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    u: DVector<f64>,
    config: ActorConfig,
}

impl Actor {
    /// Weights drawn uniformly from `[0, 0.1]`.
    pub fn new<R: Rng + ?Sized>(dim: usize, config: ActorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let u = DVector::from_fn(dim, |_, _| rng.random_range(0.0..=0.1));
        Ok(Actor { u, config })
    }

    pub fn with_weights(u: DVector<f64>, config: ActorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Actor { u, config })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn config(&self) -> &ActorConfig {
        &self.config
    }

    pub fn mean(&self, phi: &DVector<f64>) -> Result<f64> {
        check_dim(self.u.len(), phi.len())?;
        Ok(self.u.dot(phi))
    }

    /// `u += β r̂ (y − ȳ)/σ φ`. No-op for `σ ≤ 0`.
    pub fn update(&mut self, r_hat: f64, y: f64, y_bar: f64, sigma: f64, phi: &DVector<f64>) -> Result<()> {
        check_dim(self.u.len(), phi.len())?;
        if sigma <= 0.0 {
            return Ok(());
        }
        let g = self.config.beta * r_hat * (y - y_bar) / sigma;
        if !g.is_finite() {
            return Err(Error::Numeric("actor update"));
        }
        self.u.axpy(g, phi, 1.0);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CriticKind {
    /// Conventional AHC.
    Td { schedule: StepSizeSchedule },
    /// Batch baseline, re-solved after every step.
    Lstd,
    /// Fast-AHC.
    Rls { delta: f64, mu: f64 },
}

pub fn build_critic(kind: CriticKind, dim: usize, gamma: f64, lambda: f64) -> Result<Box<dyn ValueLearner>> {
    Ok(match kind {
        CriticKind::Td { schedule } => {
            if !schedule.is_valid() {
                return Err(Error::Config(format!("invalid step-size schedule {schedule:?}")));
            }
            Box::new(TdLambda::new(dim, schedule, gamma, lambda))
        }
        CriticKind::Lstd => Box::new(LstdLambda::new(dim, gamma, lambda, true)),
        CriticKind::Rls { delta, mu } => {
            let cfg = RlsTdConfig { delta, mu, lambda, gamma };
            Box::new(RlsTdLambda::new(dim, cfg)?)
        }
    })
}

/// Critic learner together with its CMAC and discount.
pub struct Critic {
    pub learner: Box<dyn ValueLearner>,
    pub features: Cmac,
    pub gamma: f64,
}

impl Critic {
    pub fn new(kind: CriticKind, features: Cmac, gamma: f64, lambda: f64) -> Result<Self> {
        let learner = build_critic(kind, features.dim(), gamma, lambda)?;
        Ok(Critic { learner, features, gamma })
    }

    pub fn value(&self, observation: &[f64]) -> f64 {
        self.learner.value(&self.features.features(observation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Failure,
    SuccessCap,
    Goal,
    StepLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Failure => "failure",
            Termination::SuccessCap => "success_cap",
            Termination::Goal => "goal",
            Termination::StepLimit => "step_limit",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Observation and applied action at one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub observation: [f64; 4],
    pub action: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub steps: usize,
    pub terminated_by: Termination,
    /// Filled only when logging was requested.
    pub log: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantStep {
    pub reward: f64,
    /// Set when the new state ends the episode.
    pub terminal: Option<Termination>,
}

/// A control task with a four-dimensional observation and scalar action.
pub trait Plant {
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R);

    fn observation(&self) -> [f64; 4];

    fn step(&mut self, action: f64) -> Result<PlantStep>;

    /// What ends an episode that hits the step cap.
    fn cap_termination(&self) -> Termination;
}

/// Cart-pole balancing. Observation order is `(θ, θ̇, x, ẋ)`.
#[derive(Debug, Clone)]
pub struct CartPolePlant {
    pub params: CartPoleParams,
    pub state: CartPoleState,
    /// Half-width of the uniform start box around the upright equilibrium.
    pub start_spread: f64,
}

impl CartPolePlant {
    pub fn new(params: CartPoleParams) -> Self {
        CartPolePlant { params, state: CartPoleState::default(), start_spread: 0.05 }
    }
}

impl Plant for CartPolePlant {
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let h = self.start_spread;
        let mut draw = || if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
        self.state = CartPoleState { x: draw(), x_dot: draw(), theta: draw(), theta_dot: draw() };
    }

    fn observation(&self) -> [f64; 4] {
        let s = &self.state;
        [s.theta, s.theta_dot, s.x, s.x_dot]
    }

    fn step(&mut self, action: f64) -> Result<PlantStep> {
        let (next, failed) = cartpole_step(&self.state, action, &self.params);
        if ![next.x, next.x_dot, next.theta, next.theta_dot].iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("cart-pole state"));
        }
        self.state = next;
        Ok(if failed {
            PlantStep { reward: -1.0, terminal: Some(Termination::Failure) }
        } else {
            PlantStep { reward: 0.0, terminal: None }
        })
    }

    fn cap_termination(&self) -> Termination {
        Termination::SuccessCap
    }
}

/// Acrobot swing-up from the hanging rest state. Observation order is
/// `(θ1, θ̇1, θ2, θ̇2)`.
#[derive(Debug, Clone)]
pub struct AcrobotPlant {
    pub params: AcrobotParams,
    pub state: AcrobotState,
}

impl AcrobotPlant {
    pub fn new(params: AcrobotParams) -> Self {
        AcrobotPlant { params, state: AcrobotState::default() }
    }
}

impl Plant for AcrobotPlant {
    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) {
        self.state = AcrobotState::default();
    }

    fn observation(&self) -> [f64; 4] {
        let s = &self.state;
        [s.theta1, s.theta1_dot, s.theta2, s.theta2_dot]
    }

    fn step(&mut self, action: f64) -> Result<PlantStep> {
        let next = acrobot_control_step(&self.state, action, &self.params);
        if ![next.theta1, next.theta2, next.theta1_dot, next.theta2_dot].iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("acrobot state"));
        }
        self.state = next;
        Ok(if acrobot_goal_reached(&next, &self.params) {
            PlantStep { reward: 1.0, terminal: Some(Termination::Goal) }
        } else {
            PlantStep { reward: 0.0, terminal: None }
        })
    }

    fn cap_termination(&self) -> Termination {
        Termination::StepLimit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub max_steps: usize,
    pub learn_actor: bool,
    pub learn_critic: bool,
    /// Actor updates are skipped until the critic has seen this many
    /// transitions in total.
    pub actor_warmup: u64,
    pub log: bool,
}

impl EpisodeOptions {
    pub fn learning(max_steps: usize) -> Self {
        EpisodeOptions { max_steps, learn_actor: true, learn_critic: true, actor_warmup: 0, log: false }
    }
}

/// Actor-critic learning state carried across episodes.
pub struct ActorCritic {
    pub actor: Actor,
    pub actor_features: Cmac,
    pub critic: Critic,
    /// Critic transitions seen so far.
    pub critic_updates: u64,
}

impl ActorCritic {
    pub fn new(actor: Actor, actor_features: Cmac, critic: Critic) -> Result<Self> {
        check_dim(actor_features.dim(), actor.weights().len())?;
        Ok(ActorCritic { actor, actor_features, critic, critic_updates: 0 })
    }

    /// One episode from a fresh plant state. The critic trace is cleared at
    /// the end; all weights persist.
    pub fn run_episode<P: Plant, R: Rng + ?Sized>(
        &mut self,
        plant: &mut P,
        rng: &mut R,
        opts: &EpisodeOptions,
    ) -> Result<EpisodeOutcome> {
        let result = self.episode_loop(plant, rng, opts);
        self.critic.learner.end_episode();
        result
    }

    fn episode_loop<P: Plant, R: Rng + ?Sized>(
        &mut self,
        plant: &mut P,
        rng: &mut R,
        opts: &EpisodeOptions,
    ) -> Result<EpisodeOutcome> {
        let ActorCritic { actor, actor_features, critic, critic_updates } = self;
        let (k1, k2) = (actor.config.k1, actor.config.k2);
        let bounds = actor.config.action_bounds;
        let gamma = critic.gamma;
        let mut log = Vec::new();

        plant.reset(rng);
        let mut obs = plant.observation();
        let mut phi_c = critic.features.features(&obs);
        let mut v_now = critic.learner.value(&phi_c);
        let mut steps = 0;
        loop {
            let phi_a = actor_features.features(&obs);
            let sigma = action_variance(v_now, k1, k2);
            let y_bar = actor.mean(&phi_a)?;
            let y = gaussian_draw(y_bar, sigma, rng);
            let applied = y.clamp(bounds[0], bounds[1]);
            if opts.log {
                log.push(StepRecord { step: steps, observation: obs, action: applied });
            }
            let out = plant.step(applied)?;
            steps += 1;

            let next_obs = plant.observation();
            let (phi_next, v_next) = if out.terminal.is_some() {
                (DVector::zeros(phi_c.len()), 0.0)
            } else {
                let phi = critic.features.features(&next_obs);
                let v = critic.learner.value(&phi);
                (phi, v)
            };
            let r_hat = internal_reward(out.reward, v_next, v_now, gamma);
            if opts.learn_critic {
                critic.learner.observe(&phi_c, &phi_next, out.reward)?;
                *critic_updates += 1;
            }
            if opts.learn_actor && *critic_updates > opts.actor_warmup {
                actor.update(r_hat, y, y_bar, sigma, &phi_a)?;
            }

            if let Some(t) = out.terminal {
                return Ok(EpisodeOutcome { steps, terminated_by: t, log });
            }
            if steps >= opts.max_steps {
                return Ok(EpisodeOutcome { steps, terminated_by: plant.cap_termination(), log });
            }
            obs = next_obs;
            phi_c = phi_next;
            v_now = if opts.learn_critic { critic.learner.value(&phi_c) } else { v_next };
        }
    }
}

/// Runs the actor alone with zero action variance and no learning.
pub fn greedy_rollout<P: Plant, R: Rng + ?Sized>(
    actor: &Actor,
    actor_features: &Cmac,
    plant: &mut P,
    rng: &mut R,
    max_steps: usize,
    log: bool,
) -> Result<EpisodeOutcome> {
    let bounds = actor.config.action_bounds;
    let mut records = Vec::new();
    plant.reset(rng);
    let mut steps = 0;
    loop {
        let obs = plant.observation();
        let action = actor.mean(&actor_features.features(&obs))?.clamp(bounds[0], bounds[1]);
        if log {
            records.push(StepRecord { step: steps, observation: obs, action });
        }
        let out = plant.step(action)?;
        steps += 1;
        if let Some(t) = out.terminal {
            return Ok(EpisodeOutcome { steps, terminated_by: t, log: records });
        }
        if steps >= max_steps {
            return Ok(EpisodeOutcome { steps, terminated_by: plant.cap_termination(), log: records });
        }
    }
}
