//! Linear policy-evaluation learners: TD(λ), LS-TD(λ) and RLS-TD(λ).
//!
//! All three share the accumulating eligibility trace `z ← γλz + φ(x_t)`,
//! updated *before* the weight update so the current features take part in
//! it, and the [`ValueLearner`] step interface.

mod lstd;
mod rls;
mod td;

pub use lstd::{lstd_accumulate, lstd_solve, LstdLambda, LstdSolution};
pub use rls::{rls_td_step, RlsTdConfig, RlsTdLambda};
pub use td::{td_lambda_step, TdLambda};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::markov::FeatureStep;

pub type WeightVector = DVector<f64>;

/// Decaying accumulation of past feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityTrace {
    z: DVector<f64>,
}

impl EligibilityTrace {
    pub fn zeros(dim: usize) -> Self {
        EligibilityTrace { z: DVector::zeros(dim) }
    }

    pub fn from_vector(z: DVector<f64>) -> Self {
        EligibilityTrace { z }
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn update(&mut self, phi: &DVector<f64>, gamma: f64, lambda: f64) -> Result<()> {
        check_dim(self.z.len(), phi.len())?;
        self.z.axpy(1.0, phi, gamma * lambda);
        Ok(())
    }

    pub fn reset(&mut self) {
        self.z.fill(0.0);
    }
}

/// `γλ z + φ`.
pub fn trace_update(z: &DVector<f64>, phi: &DVector<f64>, gamma: f64, lambda: f64) -> Result<DVector<f64>> {
    let mut trace = EligibilityTrace::from_vector(z.clone());
    trace.update(phi, gamma, lambda)?;
    Ok(trace.z)
}

/// Step sizes for TD(λ): a constant, or `α_n = α_0 (N_0 + 1) / (N_0 + n)`
/// with `n` the number of transitions seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSizeSchedule {
    Decaying { alpha0: f64, n0: f64 },
    Fixed { alpha: f64 },
}

impl StepSizeSchedule {
    pub fn alpha(&self, n: u64) -> f64 {
        match *self {
            StepSizeSchedule::Fixed { alpha } => alpha,
            StepSizeSchedule::Decaying { alpha0, n0 } => alpha0 * (n0 + 1.0) / (n0 + n as f64),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            StepSizeSchedule::Fixed { alpha } => alpha > 0.0 && alpha.is_finite(),
            StepSizeSchedule::Decaying { alpha0, n0 } => {
                alpha0 > 0.0 && alpha0.is_finite() && n0 > 0.0 && n0.is_finite()
            }
        }
    }
}

/// Whether an RLS step was applied or rejected for a vanishing gain
/// denominator. Rejected steps still advance the eligibility trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    Rejected,
}

/// Uniform online interface over the three learners.
pub trait ValueLearner {
    fn dim(&self) -> usize;

    fn weights(&self) -> &WeightVector;

    fn trace(&self) -> &EligibilityTrace;

    fn value(&self, phi: &DVector<f64>) -> f64 {
        phi.dot(self.weights())
    }

    /// Learns from the transition `φ(x_t) → φ(x_{t+1})` with reward `r_t`.
    /// Pass a zero `phi_next` on terminal transitions.
    fn observe(&mut self, phi: &DVector<f64>, phi_next: &DVector<f64>, reward: f64) -> Result<StepOutcome>;

    /// Episode boundary: clears the trace, keeps everything else.
    fn end_episode(&mut self);
}

impl<L: ValueLearner + ?Sized> ValueLearner for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn weights(&self) -> &WeightVector {
        (**self).weights()
    }
    fn trace(&self) -> &EligibilityTrace {
        (**self).trace()
    }
    fn observe(&mut self, phi: &DVector<f64>, phi_next: &DVector<f64>, reward: f64) -> Result<StepOutcome> {
        (**self).observe(phi, phi_next, reward)
    }
    fn end_episode(&mut self) {
        (**self).end_episode()
    }
}

/// Feeds one episode to `learner` and closes it. Returns the number of
/// rejected steps.
pub fn learn_episode<L: ValueLearner + ?Sized>(learner: &mut L, steps: &[FeatureStep]) -> Result<usize> {
    let mut rejected = 0;
    for s in steps {
        if learner.observe(&s.phi, &s.phi_next, s.reward)? == StepOutcome::Rejected {
            rejected += 1;
        }
    }
    learner.end_episode();
    Ok(rejected)
}
