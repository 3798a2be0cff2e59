use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EligibilityTrace, StepOutcome, ValueLearner, WeightVector};
use crate::error::{check_dim, Error, Result};

const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlsTdConfig {
    /// Initial variance matrix is `delta · I`.
    pub delta: f64,
    /// Forgetting factor in `(0, 1]`.
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl RlsTdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} = {v} out of range")));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta", self.delta);
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return bad("mu", self.mu);
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", self.lambda);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", self.gamma);
        }
        Ok(())
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
struct Workspace {
    dphi: DVector<f64>,
    pz: DVector<f64>,
    ptd: DVector<f64>,
}

impl Workspace {
    fn new(k: usize) -> Self {
        Workspace { dphi: DVector::zeros(k), pz: DVector::zeros(k), ptd: DVector::zeros(k) }
    }
}

/// Applies one RLS-TD(λ) update in place, assuming `z` already holds the
/// trace including `φ_t`. On rejection `w` and `p` are left untouched.
#[allow(clippy::too_many_arguments)]
fn rls_update_in_place(
    w: &mut DVector<f64>,
    p: &mut DMatrix<f64>,
    z: &DVector<f64>,
    phi: &DVector<f64>,
    phi_next: &DVector<f64>,
    reward: f64,
    cfg: &RlsTdConfig,
    ws: &mut Workspace,
) -> Result<StepOutcome> {
    ws.dphi.copy_from(phi);
    ws.dphi.axpy(-cfg.gamma, phi_next, 1.0);
    ws.pz.gemv(1.0, p, z, 0.0);
    let denominator = cfg.mu + ws.dphi.dot(&ws.pz);
    if !denominator.is_finite() {
        return Err(Error::Numeric("RLS gain denominator"));
    }
    if denominator.abs() < MIN_DENOMINATOR {
        return Err(Error::NearSingularUpdate { denominator });
    }
    let innovation = reward - ws.dphi.dot(w);
    if !innovation.is_finite() {
        return Err(Error::Numeric("RLS innovation"));
    }
    // gain K = P z / denominator
    w.axpy(innovation / denominator, &ws.pz, 1.0);
    // Pᵀ Δφ, i.e. the row vector Δφᵀ P as a column
    ws.ptd.gemv_tr(1.0, p, &ws.dphi, 0.0);
    p.ger(-1.0 / denominator, &ws.pz, &ws.ptd, 1.0);
    if cfg.mu != 1.0 {
        *p /= cfg.mu;
    }
    if w.iter().any(|x| !x.is_finite()) || p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("RLS state"));
    }
    Ok(StepOutcome::Applied)
}

/// One RLS-TD(λ) step as a pure function: returns `(W', P', z')`.
///
/// The trace is advanced first, then
/// `K = P z' / (μ + Δφᵀ P z')`, `W' = W + K (r − Δφᵀ W)` and
/// `P' = (P − P z' Δφᵀ P / (μ + Δφᵀ P z')) / μ` with `Δφ = φ_t − γ φ_{t+1}`.
#[allow(clippy::too_many_arguments)]
pub fn rls_td_step(
    w: &WeightVector,
    p: &DMatrix<f64>,
    z: &DVector<f64>,
    phi: &DVector<f64>,
    phi_next: &DVector<f64>,
    reward: f64,
    cfg: &RlsTdConfig,
) -> Result<(WeightVector, DMatrix<f64>, DVector<f64>)> {
    let k = w.len();
    check_dim(k, p.nrows())?;
    check_dim(k, p.ncols())?;
    for x in [z, phi, phi_next] {
        check_dim(k, x.len())?;
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("variance matrix"));
    }
    let mut trace = EligibilityTrace::from_vector(z.clone());
    trace.update(phi, cfg.gamma, cfg.lambda)?;
    let (mut w, mut p) = (w.clone(), p.clone());
    rls_update_in_place(&mut w, &mut p, trace.as_vector(), phi, phi_next, reward, cfg, &mut Workspace::new(k))?;
    Ok((w, p, trace.z))
}

/// Recursive least-squares TD(λ) learner.
#[derive(Debug, Clone)]
pub struct RlsTdLambda {
    weights: WeightVector,
    variance: DMatrix<f64>,
    trace: EligibilityTrace,
    config: RlsTdConfig,
    rejected: usize,
    ws: Workspace,
}

impl RlsTdLambda {
    /// Zero initial weights, `P_0 = δI`.
    pub fn new(dim: usize, config: RlsTdConfig) -> Result<Self> {
        Self::with_weights(DVector::zeros(dim), config)
    }

    pub fn with_weights(weights: WeightVector, config: RlsTdConfig) -> Result<Self> {
        config.validate()?;
        let k = weights.len();
        Ok(RlsTdLambda {
            weights,
            variance: DMatrix::identity(k, k) * config.delta,
            trace: EligibilityTrace::zeros(k),
            config,
            rejected: 0,
            ws: Workspace::new(k),
        })
    }

    pub fn variance(&self) -> &DMatrix<f64> {
        &self.variance
    }

    pub fn config(&self) -> &RlsTdConfig {
        &self.config
    }

    /// Steps rejected because the gain denominator vanished.
    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }
}

impl ValueLearner for RlsTdLambda {
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
        self.trace.update(phi, self.config.gamma, self.config.lambda)?;
        match rls_update_in_place(
            &mut self.weights,
            &mut self.variance,
            self.trace.as_vector(),
            phi,
            phi_next,
            reward,
            &self.config,
            &mut self.ws,
        ) {
            Err(Error::NearSingularUpdate { .. }) => {
                self.rejected += 1;
                Ok(StepOutcome::Rejected)
            }
            other => other,
        }
    }

    fn end_episode(&mut self) {
        self.trace.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn cfg(delta: f64, mu: f64, lambda: f64, gamma: f64) -> RlsTdConfig {
        RlsTdConfig { delta, mu, lambda, gamma }
    }

    #[test]
    fn hand_evaluated_single_step() {
        let c = cfg(1.0, 1.0, 0.0, 1.0);
        let p = DMatrix::identity(1, 1);
        let (w, p2, z) = rls_td_step(&v(&[0.0]), &p, &v(&[0.0]), &v(&[1.0]), &v(&[0.0]), -2.0, &c).unwrap();
        assert_eq!(w, v(&[-1.0]));
        assert_eq!(p2[(0, 0)], 0.5);
        assert_eq!(z, v(&[1.0]));
    }

    #[test]
    fn zero_innovation_only_rescales() {
        let c = cfg(2.0, 0.9, 0.5, 1.0);
        let phi = v(&[0.3, 0.7]);
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, -0.3, 1.5]);
        let w = v(&[4.0, -1.0]);
        // φ_{t+1} = φ_t and γ = 1 make Δφ vanish
        let (w2, p2, _) = rls_td_step(&w, &p, &v(&[0.1, 0.1]), &phi, &phi, 0.0, &c).unwrap();
        assert_eq!(w2, w);
        assert_abs_diff_eq!(p2, &p / 0.9, epsilon = 1e-15);
    }

    #[test]
    fn vanishing_denominator_is_rejected() {
        let c = cfg(1.0, 1.0, 0.0, 1.0);
        let p = DMatrix::identity(1, 1);
        let err = rls_td_step(&v(&[0.0]), &p, &v(&[0.0]), &v(&[1.0]), &v(&[2.0]), 1.0, &c).unwrap_err();
        assert!(matches!(err, Error::NearSingularUpdate { .. }));

        let mut learner = RlsTdLambda::new(1, c).unwrap();
        let out = learner.observe(&v(&[1.0]), &v(&[2.0]), 1.0).unwrap();
        assert_eq!(out, StepOutcome::Rejected);
        assert_eq!(learner.rejected_steps(), 1);
        assert_eq!(learner.weights()[0], 0.0);
        assert_eq!(learner.variance()[(0, 0)], 1.0);
        // the trace still advanced
        assert_eq!(learner.trace().as_vector()[0], 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 1.0, 0.5, 0.9).validate().is_err());
        assert!(cfg(1.0, 0.0, 0.5, 0.9).validate().is_err());
        assert!(cfg(1.0, 1.1, 0.5, 0.9).validate().is_err());
        assert!(cfg(1.0, 1.0, 1.5, 0.9).validate().is_err());
        assert!(cfg(1.0, 1.0, 0.5, 0.0).validate().is_err());
        assert!(cfg(1.0, 0.995, 1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn episode_reset_only_clears_trace() {
        let mut learner = RlsTdLambda::new(2, cfg(10.0, 1.0, 0.8, 0.9)).unwrap();
        learner.observe(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 1.0).unwrap();
        let (w, p) = (learner.weights().clone(), learner.variance().clone());
        learner.end_episode();
        assert_eq!(learner.trace().as_vector(), &DVector::<f64>::zeros(2));
        assert_eq!(learner.weights(), &w);
        assert_eq!(learner.variance(), &p);
    }

    /// RLS-TD(0) as originally stated, written independently.
    fn rls_td0(w: &DVector<f64>, p: &DMatrix<f64>, phi: &DVector<f64>, phi_next: &DVector<f64>, r: f64, gamma: f64) -> (DVector<f64>, DMatrix<f64>) {
        let d = phi - phi_next * gamma;
        let denom = 1.0 + (d.transpose() * p * phi)[(0, 0)];
        let w2 = w + p * phi * ((r - d.dot(w)) / denom);
        let p2 = p - p * phi * d.transpose() * p / denom;
        (w2, p2)
    }

    #[test]
    fn lambda_zero_unit_forgetting_is_rls_td0() {
        let c = cfg(5.0, 1.0, 0.0, 0.9);
        let mut learner = RlsTdLambda::new(3, c).unwrap();
        let mut w = DVector::zeros(3);
        let mut p = DMatrix::identity(3, 3) * 5.0;
        for t in 0..50 {
            let t = t as f64;
            let phi = v(&[t.sin(), t.cos(), 1.0]);
            let phi_next = v(&[(t + 1.0).sin(), (t + 1.0).cos(), 1.0]);
            (w, p) = rls_td0(&w, &p, &phi, &phi_next, (0.3 * t).sin(), 0.9);
            learner.observe(&phi, &phi_next, (0.3 * t).sin()).unwrap();
        }
        assert_abs_diff_eq!(*learner.weights(), w, epsilon = 1e-9);
        assert_abs_diff_eq!(*learner.variance(), p, epsilon = 1e-9);
    }

    #[test]
    fn pure_step_is_deterministic() {
        let c = cfg(3.0, 0.99, 0.7, 0.95);
        let args = (v(&[1.0, 2.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 2.0]), v(&[0.5, 0.5]), v(&[1.0, 0.0]), v(&[0.0, 1.0]));
        let a = rls_td_step(&args.0, &args.1, &args.2, &args.3, &args.4, 0.7, &c).unwrap();
        let b = rls_td_step(&args.0, &args.1, &args.2, &args.3, &args.4, 0.7, &c).unwrap();
        assert_eq!(a, b);
    }

    fn features(k: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, k), n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// After every step P' (P^-1 + z' Δφᵀ) = I.
        #[test]
        fn sherman_morrison_identity(
            feats in features(4, 30),
            rewards in prop::collection::vec(-2.0f64..2.0, 29),
            lambda in 0.0f64..1.0,
            delta in 0.5f64..20.0,
        ) {
            let c = cfg(delta, 1.0, lambda, 0.9);
            let mut learner = RlsTdLambda::new(4, c).unwrap();
            for t in 0..29 {
                let phi = v(&feats[t]);
                let phi_next = v(&feats[t + 1]);
                let Some(p_inv) = learner.variance().clone().try_inverse() else { break };
                if learner.observe(&phi, &phi_next, rewards[t]).unwrap() == StepOutcome::Rejected {
                    continue;
                }
                let z = learner.trace().as_vector();
                let m = p_inv + z * (&phi - &phi_next * 0.9).transpose();
                let prod = learner.variance() * m;
                let err = (prod - DMatrix::<f64>::identity(4, 4)).amax();
                // scale by conditioning: the identity is exact in exact arithmetic
                let scale = learner.variance().norm().max(1.0) * delta.max(1.0);
                prop_assert!(err < 1e-8 * scale, "step {t}: {err}");
            }
        }
    }
}
