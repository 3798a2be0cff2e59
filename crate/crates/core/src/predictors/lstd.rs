use nalgebra::{DMatrix, DVector};

use super::{EligibilityTrace, StepOutcome, ValueLearner, WeightVector};
use crate::error::{check_dim, Error, Result};

const MAX_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-8;

/// `A += z (φ_t − γ φ_{t+1})ᵀ`, `b += z r`. `z` must already include `φ_t`.
pub fn lstd_accumulate(
    a: &mut DMatrix<f64>,
    b: &mut DVector<f64>,
    z: &DVector<f64>,
    phi: &DVector<f64>,
    phi_next: &DVector<f64>,
    reward: f64,
    gamma: f64,
) -> Result<()> {
    let k = b.len();
    check_dim(k, a.nrows())?;
    check_dim(k, a.ncols())?;
    for x in [z, phi, phi_next] {
        check_dim(k, x.len())?;
    }
    let dphi = phi - phi_next * gamma;
    a.ger(1.0, z, &dphi, 1.0);
    b.axpy(reward, z, 1.0);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstdSolution {
    pub weights: WeightVector,
    /// The system was singular or ill-conditioned and a ridge term was added.
    pub regularized: bool,
}

fn norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn norm_one(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Dense solve of `A W = b`. Singular or badly conditioned systems (1-norm
/// condition above 1e12) are solved as `(A + εI) W = b` with
/// `ε = 1e-8 ‖A‖∞`, and the result is flagged.
pub fn lstd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LstdSolution> {
    let k = b.len();
    check_dim(k, a.nrows())?;
    check_dim(k, a.ncols())?;
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("LS-TD system"));
    }
    if let Some(inv) = a.clone().try_inverse() {
        if norm_one(a) * norm_one(&inv) <= MAX_CONDITION {
            return Ok(LstdSolution { weights: inv * b, regularized: false });
        }
    }
    let eps = RIDGE_SCALE * norm_inf(a);
    if eps == 0.0 {
        return Ok(LstdSolution { weights: DVector::zeros(k), regularized: true });
    }
    let ridge = a + DMatrix::identity(k, k) * eps;
    let weights = ridge.lu().solve(b).ok_or(Error::Numeric("regularized LS-TD solve"))?;
    if weights.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("regularized LS-TD solve"));
    }
    Ok(LstdSolution { weights, regularized: true })
}

/// Batch least-squares TD(λ): accumulates `A`, `b` and re-solves either
/// after every step or at episode ends.
#[derive(Debug, Clone)]
pub struct LstdLambda {
    a: DMatrix<f64>,
    b: DVector<f64>,
    weights: WeightVector,
    trace: EligibilityTrace,
    gamma: f64,
    lambda: f64,
    solve_each_step: bool,
    regularized_solves: usize,
}

impl LstdLambda {
    pub fn new(dim: usize, gamma: f64, lambda: f64, solve_each_step: bool) -> Self {
        LstdLambda {
            a: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
            weights: DVector::zeros(dim),
            trace: EligibilityTrace::zeros(dim),
            gamma,
            lambda,
            solve_each_step,
            regularized_solves: 0,
        }
    }

    pub fn system(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a, &self.b)
    }

    /// Number of solves that needed the ridge fallback.
    pub fn regularized_solves(&self) -> usize {
        self.regularized_solves
    }

    pub fn solve(&mut self) -> Result<()> {
        let sol = lstd_solve(&self.a, &self.b)?;
        if sol.regularized {
            self.regularized_solves += 1;
        }
        self.weights = sol.weights;
        Ok(())
    }
}

impl ValueLearner for LstdLambda {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn weights(&self) -> &WeightVector {
        &self.weights
    }

    fn trace(&self) -> &EligibilityTrace {
        &self.trace
    }

    fn observe(&mut self, phi: &DVector<f64>, phi_next: &DVector<f64>, reward: f64) -> Result<StepOutcome> {
        self.trace.update(phi, self.gamma, self.lambda)?;
        lstd_accumulate(&mut self.a, &mut self.b, self.trace.as_vector(), phi, phi_next, reward, self.gamma)?;
        if self.solve_each_step {
            self.solve()?;
        }
        Ok(StepOutcome::Applied)
    }

    fn end_episode(&mut self) {
        self.trace.reset();
        if !self.solve_each_step {
            // a failed solve keeps the previous estimate
            let _ = self.solve();
        }
    }
}
