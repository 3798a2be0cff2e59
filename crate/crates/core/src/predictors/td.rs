use nalgebra::DVector;

use super::{EligibilityTrace, StepOutcome, StepSizeSchedule, ValueLearner, WeightVector};
use crate::error::{check_dim, Error, Result};

/// One online linear TD(λ) step. Returns the updated weights and trace.
#[allow(clippy::too_many_arguments)]
pub fn td_lambda_step(
    w: &WeightVector,
    z: &DVector<f64>,
    phi: &DVector<f64>,
    phi_next: &DVector<f64>,
    reward: f64,
    alpha: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(WeightVector, DVector<f64>)> {
    check_dim(w.len(), z.len())?;
    check_dim(w.len(), phi.len())?;
    check_dim(w.len(), phi_next.len())?;
    let mut trace = EligibilityTrace::from_vector(z.clone());
    trace.update(phi, gamma, lambda)?;
    let td_error = reward + gamma * phi_next.dot(w) - phi.dot(w);
    let mut w = w.clone();
    w.axpy(alpha * td_error, trace.as_vector(), 1.0);
    Ok((w, trace.z))
}

/// Conventional linear TD(λ) with a step-size schedule.
#[derive(Debug, Clone)]
pub struct TdLambda {
    weights: WeightVector,
    trace: EligibilityTrace,
    schedule: StepSizeSchedule,
    transitions: u64,
    gamma: f64,
    lambda: f64,
}

impl TdLambda {
    pub fn new(dim: usize, schedule: StepSizeSchedule, gamma: f64, lambda: f64) -> Self {
        TdLambda {
            weights: DVector::zeros(dim),
            trace: EligibilityTrace::zeros(dim),
            schedule,
            transitions: 0,
            gamma,
            lambda,
        }
    }

    pub fn transitions(&self) -> u64 {
        self.transitions
    }
}

impl ValueLearner for TdLambda {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &WeightVector {
        &self.weights
    }

    fn trace(&self) -> &EligibilityTrace {
        &self.trace
    }

    fn observe(&mut self, phi: &DVector<f64>, phi_next: &DVector<f64>, reward: f64) -> Result<StepOutcome> {
        check_dim(self.dim(), phi_next.len())?;
        let alpha = self.schedule.alpha(self.transitions);
        self.trace.update(phi, self.gamma, self.lambda)?;
        let td_error = reward + self.gamma * phi_next.dot(&self.weights) - phi.dot(&self.weights);
        if !td_error.is_finite() {
            return Err(Error::Numeric("TD error"));
        }
        self.weights.axpy(alpha * td_error, self.trace.as_vector(), 1.0);
        self.transitions += 1;
        Ok(StepOutcome::Applied)
    }

    fn end_episode(&mut self) {
        self.trace.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn zero_td_error_keeps_weights() {
        // V(x_t) = 1, V(x_{t+1}) = 2, γ = 0.5, r = 0
        let w = v(&[1.0, 2.0]);
        let (w2, _) = td_lambda_step(&w, &v(&[0.3, 0.0]), &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 0.0, 0.7, 0.5, 0.9).unwrap();
        assert_eq!(w2, w);
    }

    #[test]
    fn single_feature_terminal_step() {
        let (w, z) = td_lambda_step(&v(&[0.0]), &v(&[0.0]), &v(&[1.0]), &v(&[0.0]), -2.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(w, v(&[-2.0]));
        assert_eq!(z, v(&[1.0]));
    }

    #[test]
    fn lambda_zero_uses_current_features() {
        let phi = v(&[0.2, 0.8]);
        let (_, z) = td_lambda_step(&v(&[1.0, -1.0]), &v(&[5.0, 5.0]), &phi, &v(&[1.0, 0.0]), 1.0, 0.1, 0.9, 0.0).unwrap();
        assert_eq!(z, phi);
    }

    #[test]
    fn matches_tabular_td0() {
        // 3-state cycle with tabular features against a hand-written table update
        let path = [(0usize, 1usize, 1.0), (1, 2, -0.5), (2, 0, 2.0), (0, 2, 0.25), (2, 1, 1.0), (1, 0, 0.0)];
        let (alpha, gamma) = (0.3, 0.9);
        let mut learner = TdLambda::new(3, StepSizeSchedule::Fixed { alpha }, gamma, 0.0);
        let mut table = [0.0f64; 3];
        let onehot = |s: usize| {
            let mut e = DVector::zeros(3);
            e[s] = 1.0;
            e
        };
        for _ in 0..20 {
            for &(s, s2, r) in &path {
                table[s] += alpha * (r + gamma * table[s2] - table[s]);
                learner.observe(&onehot(s), &onehot(s2), r).unwrap();
            }
        }
        for (w, v) in learner.weights().iter().zip(&table) {
            assert_abs_diff_eq!(*w, *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn learner_agrees_with_pure_step() {
        let schedule = StepSizeSchedule::Decaying { alpha0: 0.1, n0: 10.0 };
        let mut learner = TdLambda::new(2, schedule, 0.95, 0.6);
        let mut w = DVector::zeros(2);
        let mut z = DVector::zeros(2);
        for n in 0..30u64 {
            let t = n as f64;
            let (phi, phi_next) = (v(&[t.sin(), 1.0]), v(&[(t + 1.0).sin(), 1.0]));
            let r = (t * 0.7).cos();
            (w, z) = td_lambda_step(&w, &z, &phi, &phi_next, r, schedule.alpha(n), 0.95, 0.6).unwrap();
            learner.observe(&phi, &phi_next, r).unwrap();
        }
        assert_abs_diff_eq!(*learner.weights(), w, epsilon = 1e-14);
        assert_eq!(learner.transitions(), 30);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(td_lambda_step(&v(&[0.0]), &v(&[0.0]), &v(&[1.0, 0.0]), &v(&[0.0]), 0.0, 0.1, 1.0, 0.0).is_err());
    }
}
