//! Finite Markov reward chains, trajectory sampling and the analytic TD(λ)
//! fixed point.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{basis_matrix, FeatureVector, Featurizer};

const ROW_SUM_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_TRAJECTORY: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    State(usize),
    Distribution(Vec<f64>),
}

/// Finite chain with transition matrix `P`, transition rewards `r(i, j)` and
/// a set of absorbing states. For an absorbing state `a`, `r(a, a)` is the
/// terminal reward collected on its absorbing step.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    transition: DMatrix<f64>,
    reward: DMatrix<f64>,
    absorbing: Vec<bool>,
    initial: InitialState,
}

/// One observed step of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub reward: f64,
    /// `to` is absorbing.
    pub terminal: bool,
}

/// A learning sample expressed in feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStep {
    pub phi: FeatureVector,
    /// Zero on the absorbing step.
    pub phi_next: FeatureVector,
    pub reward: f64,
}

impl MarkovChain {
    pub fn new(
        transition: DMatrix<f64>,
        reward: DMatrix<f64>,
        absorbing: &[usize],
        initial: InitialState,
    ) -> Result<Self> {
        let n = transition.nrows();
        if n == 0 || transition.ncols() != n {
            return Err(Error::Config("transition matrix must be square and nonempty".into()));
        }
        if reward.shape() != (n, n) {
            return Err(Error::Config(format!(
                "reward matrix is {:?}, expected {n}×{n}",
                reward.shape()
            )));
        }
        for (i, row) in transition.row_iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Config(format!("row {i} has invalid probabilities")));
            }
            if (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("row {i} sums to {}", row.sum())));
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config("rewards must be finite".into()));
        }
        let mut flags = vec![false; n];
        for &a in absorbing {
            if a >= n {
                return Err(Error::Config(format!("absorbing state {a} out of range")));
            }
            if transition[(a, a)] != 1.0 {
                return Err(Error::Config(format!("absorbing state {a} must self-loop")));
            }
            flags[a] = true;
        }
        match &initial {
            InitialState::State(s) if *s >= n => {
                return Err(Error::Config(format!("initial state {s} out of range")))
            }
            InitialState::Distribution(d)
                if d.len() != n
                    || d.iter().any(|p| *p < 0.0)
                    || (d.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL =>
            {
                return Err(Error::Config("initial distribution invalid".into()))
            }
            _ => {}
        }
        Ok(MarkovChain { transition, reward, absorbing: flags, initial })
    }

    pub fn n_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn reward(&self) -> &DMatrix<f64> {
        &self.reward
    }

    pub fn is_absorbing(&self, state: usize) -> bool {
        self.absorbing[state]
    }

    pub fn has_absorbing(&self) -> bool {
        self.absorbing.iter().any(|a| *a)
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    pub fn initial_distribution(&self) -> DVector<f64> {
        match &self.initial {
            InitialState::State(s) => {
                let mut d = DVector::zeros(self.n_states());
                d[*s] = 1.0;
                d
            }
            InitialState::Distribution(d) => DVector::from_column_slice(d),
        }
    }

    /// Transition matrix of the process seen by the learner: absorbing rows
    /// are zeroed because the episode ends (next features are zero) and the
    /// trace is reset on restart.
    pub fn episodic_transition(&self) -> DMatrix<f64> {
        let mut p = self.transition.clone();
        for (i, &abs) in self.absorbing.iter().enumerate() {
            if abs {
                p.row_mut(i).fill(0.0);
            }
        }
        p
    }

    /// Expected one-step reward `r̄(i) = Σ_j p_ij r(i, j)`; the terminal
    /// reward for absorbing states.
    pub fn expected_reward(&self) -> DVector<f64> {
        DVector::from_fn(self.n_states(), |i, _| {
            if self.absorbing[i] {
                self.reward[(i, i)]
            } else {
                self.transition.row(i).dot(&self.reward.row(i))
            }
        })
    }

    fn sample_next<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = self.transition.row(state);
        let mut acc = 0.0;
        let mut last = state;
        for (j, p) in row.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last = j;
                if u < acc {
                    return j;
                }
            }
        }
        last
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.initial {
            InitialState::State(s) => *s,
            InitialState::Distribution(d) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (j, p) in d.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j;
                    }
                }
                d.len() - 1
            }
        }
    }
}

/// The 13-state Hop-World chain. State 12 is initial, state 0 absorbing.
pub fn hopworld() -> MarkovChain {
    let n = 13;
    let mut p = DMatrix::zeros(n, n);
    let mut r = DMatrix::zeros(n, n);
    p[(0, 0)] = 1.0;
    // state 1 can only step to 0; its reward keeps V(1) = -2
    p[(1, 0)] = 1.0;
    r[(1, 0)] = -2.0;
    for i in 2..n {
        for j in [i - 1, i - 2] {
            p[(i, j)] = 0.5;
            r[(i, j)] = -3.0;
        }
    }
    MarkovChain::new(p, r, &[0], InitialState::State(12)).expect("hop-world is well formed")
}

/// `V(i) = -2i`.
pub fn true_hopworld_values() -> Vec<f64> {
    (0..13).map(|i| -2.0 * i as f64).collect()
}

/// Samples one episode from the initial state until a transition into an
/// absorbing state. Fails after `max_len` steps.
pub fn sample_trajectory<R: Rng + ?Sized>(
    chain: &MarkovChain,
    rng: &mut R,
    max_len: usize,
) -> Result<Vec<Transition>> {
    if !chain.has_absorbing() {
        return Err(Error::Domain("chain has no absorbing state".into()));
    }
    let mut state = chain.sample_initial(rng);
    let mut out = Vec::new();
    while !chain.is_absorbing(state) {
        if out.len() >= max_len {
            return Err(Error::RunawayChain { steps: max_len });
        }
        let next = chain.sample_next(state, rng);
        out.push(Transition {
            from: state,
            to: next,
            reward: chain.reward[(state, next)],
            terminal: chain.is_absorbing(next),
        });
        state = next;
    }
    Ok(out)
}

/// Samples `steps` transitions of an ergodic chain starting from `start`.
pub fn sample_path<R: Rng + ?Sized>(
    chain: &MarkovChain,
    start: usize,
    steps: usize,
    rng: &mut R,
) -> Vec<Transition> {
    let mut state = start;
    (0..steps)
        .map(|_| {
            let next = chain.sample_next(state, rng);
            let t = Transition {
                from: state,
                to: next,
                reward: chain.reward[(state, next)],
                terminal: chain.is_absorbing(next),
            };
            state = next;
            t
        })
        .collect()
}

/// Converts an episode into learner samples. A terminal transition is
/// followed by the absorbing-state step `(φ(a), 0, r_T)`.
pub fn episode_steps<F: Featurizer<usize> + ?Sized>(
    chain: &MarkovChain,
    episode: &[Transition],
    featurizer: &F,
) -> Vec<FeatureStep> {
    let k = featurizer.dim();
    let mut out = Vec::with_capacity(episode.len() + 1);
    for t in episode {
        out.push(FeatureStep {
            phi: featurizer.features(&t.from),
            phi_next: featurizer.features(&t.to),
            reward: t.reward,
        });
        if t.terminal {
            out.push(FeatureStep {
                phi: featurizer.features(&t.to),
                phi_next: DVector::zeros(k),
                reward: chain.reward[(t.to, t.to)],
            });
        }
    }
    out
}

fn solve_square(m: DMatrix<f64>, rhs: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let lu = m.lu();
    lu.solve(rhs).ok_or_else(|| Error::Domain(format!("{what} is singular")))
}

/// Stationary distribution of an ergodic chain.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut m = DMatrix::identity(n, n) - p.transpose();
    m.row_mut(n - 1).fill(1.0);
    let mut rhs = DMatrix::zeros(n, 1);
    rhs[(n - 1, 0)] = 1.0;
    let pi = solve_square(m, &rhs, "stationary system")?;
    Ok(pi.column(0).into_owned())
}

/// State weighting `D` of the learning process: the stationary distribution
/// for ergodic chains; for absorbing chains the normalised expected visits
/// per episode of the restarted process (absorbing state counted once).
pub fn visit_distribution(chain: &MarkovChain) -> Result<DVector<f64>> {
    if !chain.has_absorbing() {
        return stationary_distribution(chain.transition());
    }
    let p = chain.episodic_transition();
    let n = chain.n_states();
    let m = DMatrix::identity(n, n) - p.transpose();
    let rhs = DMatrix::from_column_slice(n, 1, chain.initial_distribution().as_slice());
    let visits = solve_square(m, &rhs, "visit system")?.column(0).into_owned();
    let total = visits.sum();
    Ok(visits / total)
}

/// Expected-update system `A W = b` whose solution is the TD(λ) fixed point.
#[derive(Debug, Clone)]
pub struct TdSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Basis matrix `Φ` (`N × K`).
    pub phi: DMatrix<f64>,
    /// Diagonal of `D`.
    pub weighting: DVector<f64>,
}

impl TdSystem {
    pub fn build<F: Featurizer<usize> + ?Sized>(
        chain: &MarkovChain,
        featurizer: &F,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda {lambda} outside [0, 1]")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!("gamma {gamma} outside (0, 1]")));
        }
        let n = chain.n_states();
        let p = chain.episodic_transition();
        let phi = basis_matrix(featurizer, n);
        let d = visit_distribution(chain)?;
        let eye = DMatrix::<f64>::identity(n, n);

        // (I - γλP)^-1 [ (I - γP)Φ | r̄ ]
        let r_bar = chain.expected_reward();
        let k = phi.ncols();
        let mut rhs = DMatrix::zeros(n, k + 1);
        rhs.view_mut((0, 0), (n, k)).copy_from(&((&eye - &p * gamma) * &phi));
        rhs.set_column(k, &r_bar);
        let resolved = solve_square(&eye - &p * (gamma * lambda), &rhs, "I - γλP")?;

        let phi_t_d = phi.transpose() * DMatrix::from_diagonal(&d);
        let a = &phi_t_d * resolved.columns(0, k);
        let b = (&phi_t_d * resolved.column(k)).column(0).into_owned();
        Ok(TdSystem { a, b, phi, weighting: d })
    }

    pub fn solve(&self) -> Result<DVector<f64>> {
        let k = self.a.ncols();
        let rank = self.a.clone().svd(false, false).rank(1e-10 * self.a.norm().max(1e-300));
        if rank < k {
            return Err(Error::RankDeficient { rank, dim: k });
        }
        self.a
            .clone()
            .lu()
            .solve(&self.b)
            .ok_or(Error::RankDeficient { rank, dim: k })
    }
}

/// Limit `W*` of TD(λ), LS-TD(λ) and RLS-TD(λ) on `chain`.
pub fn exact_fixed_point<F: Featurizer<usize> + ?Sized>(
    chain: &MarkovChain,
    featurizer: &F,
    lambda: f64,
    gamma: f64,
) -> Result<DVector<f64>> {
    TdSystem::build(chain, featurizer, lambda, gamma)?.solve()
}

/// True value function `V* = (I - γP)^-1 r̄` of the episodic process.
pub fn true_values(chain: &MarkovChain, gamma: f64) -> Result<DVector<f64>> {
    let n = chain.n_states();
    let m = DMatrix::identity(n, n) - chain.episodic_transition() * gamma;
    let rhs = DMatrix::from_column_slice(n, 1, chain.expected_reward().as_slice());
    Ok(solve_square(m, &rhs, "I - γP")?.column(0).into_owned())
}

/// Both sides of `‖ΦW* − V*‖_D ≤ (1−λγ)/(1−γ) ‖ΠV* − V*‖_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn weighted_norm(v: &DVector<f64>, d: &DVector<f64>) -> f64 {
    v.iter().zip(d.iter()).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

pub fn error_bound_check<F: Featurizer<usize> + ?Sized>(
    chain: &MarkovChain,
    featurizer: &F,
    lambda: f64,
    gamma: f64,
) -> Result<BoundCheck> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("error bound needs 0 < gamma < 1, got {gamma}")));
    }
    let system = TdSystem::build(chain, featurizer, lambda, gamma)?;
    let w_star = system.solve()?;
    let v_star = true_values(chain, gamma)?;
    let d = &system.weighting;
    let phi = &system.phi;
    let phi_t_d = phi.transpose() * DMatrix::from_diagonal(d);
    let gram = &phi_t_d * phi;
    let coeffs = gram
        .lu()
        .solve(&(&phi_t_d * &v_star))
        .ok_or(Error::RankDeficient { rank: 0, dim: phi.ncols() })?;
    let projected = phi * coeffs;

    let lhs = weighted_norm(&(phi * &w_star - &v_star), d);
    let rhs = (1.0 - lambda * gamma) / (1.0 - gamma) * weighted_norm(&(projected - &v_star), d);
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs + 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{HopWorldFeatures, MatrixFeatures, TabularFeatures};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hopworld_structure() {
        let chain = hopworld();
        let p = chain.transition();
        assert_eq!(p[(12, 11)], 0.5);
        assert_eq!(p[(12, 10)], 0.5);
        assert_eq!(p[(1, 0)], 1.0);
        assert_eq!(chain.reward()[(1, 0)], -2.0);
        assert_eq!(chain.reward()[(5, 3)], -3.0);
        assert!(chain.is_absorbing(0));
        assert_eq!(chain.initial(), &InitialState::State(12));
    }

    #[test]
    fn hopworld_values_solve_bellman() {
        let v = true_hopworld_values();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[12], -24.0);
        assert_eq!(0.5 * (-3.0 + v[1]) + 0.5 * (-3.0 + v[0]), v[2]);
        let exact = true_values(&hopworld(), 1.0).unwrap();
        for (a, b) in exact.iter().zip(&v) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn trajectories_are_deterministic_and_bounded() {
        let chain = hopworld();
        let a = sample_trajectory(&chain, &mut ChaCha8Rng::seed_from_u64(5), 100).unwrap();
        let b = sample_trajectory(&chain, &mut ChaCha8Rng::seed_from_u64(5), 100).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let t = sample_trajectory(&chain, &mut rng, 100).unwrap();
            assert!((6..=12).contains(&t.len()));
            assert_eq!(t[0].from, 12);
            assert!(t.last().unwrap().terminal);
            assert!(t[..t.len() - 1].iter().all(|s| !s.terminal));
        }
    }

    #[test]
    fn monte_carlo_return_matches_value() {
        let chain = hopworld();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| sample_trajectory(&chain, &mut rng, 100).unwrap().iter().map(|t| t.reward).sum::<f64>())
            .sum();
        assert!((total / n as f64 + 24.0).abs() < 0.1);
    }

    #[test]
    fn empirical_transition_frequencies() {
        let p = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.6, 0.1, 0.3, 0.25, 0.25, 0.5]);
        let chain = MarkovChain::new(p.clone(), DMatrix::zeros(3, 3), &[], InitialState::State(0)).unwrap();
        let path = sample_path(&chain, 0, 100_000, &mut ChaCha8Rng::seed_from_u64(3));
        let mut counts = DMatrix::<f64>::zeros(3, 3);
        for t in &path {
            counts[(t.from, t.to)] += 1.0;
        }
        // chi-square per row, 2 dof; 13.8 is the 0.999 quantile
        for i in 0..3 {
            let n: f64 = counts.row(i).sum();
            let chi2: f64 = (0..3)
                .map(|j| (counts[(i, j)] - n * p[(i, j)]).powi(2) / (n * p[(i, j)]))
                .sum();
            assert!(chi2 < 13.8, "row {i} chi2 {chi2}");
        }
    }

    #[test]
    fn runaway_guard() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let chain = MarkovChain::new(p, DMatrix::zeros(2, 2), &[1], InitialState::State(0)).unwrap();
        assert!(sample_trajectory(&chain, &mut ChaCha8Rng::seed_from_u64(0), 5).is_ok());

        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let chain = MarkovChain::new(p, DMatrix::zeros(3, 3), &[2], InitialState::State(0)).unwrap();
        assert_eq!(
            sample_trajectory(&chain, &mut ChaCha8Rng::seed_from_u64(0), 50),
            Err(Error::RunawayChain { steps: 50 })
        );
    }

    #[test]
    fn invalid_chains_are_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.0, 1.0]);
        assert!(MarkovChain::new(p, DMatrix::zeros(2, 2), &[1], InitialState::State(0)).is_err());
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(MarkovChain::new(p.clone(), DMatrix::zeros(2, 2), &[1], InitialState::State(0)).is_err());
        let mut r = DMatrix::zeros(2, 2);
        r[(0, 1)] = f64::INFINITY;
        assert!(MarkovChain::new(p, r, &[], InitialState::State(0)).is_err());
    }

    #[test]
    fn episode_steps_append_absorbing_update() {
        let chain = hopworld();
        let traj = sample_trajectory(&chain, &mut ChaCha8Rng::seed_from_u64(2), 100).unwrap();
        let steps = episode_steps(&chain, &traj, &HopWorldFeatures);
        assert_eq!(steps.len(), traj.len() + 1);
        let last = steps.last().unwrap();
        assert_eq!(last.phi.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(last.phi_next.as_slice(), &[0.0; 4]);
        assert_eq!(last.reward, 0.0);
    }

    #[test]
    fn hopworld_fixed_point_is_exact() {
        let chain = hopworld();
        for lambda in [0.0, 0.3, 0.5, 0.8, 1.0] {
            let w = exact_fixed_point(&chain, &HopWorldFeatures, lambda, 1.0).unwrap();
            for (a, b) in w.iter().zip([-24.0, -16.0, -8.0, 0.0]) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
            }
        }
    }

    fn two_state_chain() -> MarkovChain {
        let p = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.6, 0.4]);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        MarkovChain::new(p, r, &[], InitialState::State(0)).unwrap()
    }

    #[test]
    fn tabular_fixed_point_equals_true_values_for_any_lambda() {
        let chain = two_state_chain();
        let gamma = 0.9;
        // oracle: (I - γP) V = r̄ by hand
        let rbar = [0.3 * 1.0 + 0.7 * -2.0, 0.6 * 0.5 + 0.4 * 3.0];
        let m = DMatrix::from_row_slice(2, 2, &[1.0 - 0.27, -0.63, -0.54, 1.0 - 0.36]);
        let v = m.lu().solve(&DVector::from_vec(rbar.to_vec())).unwrap();
        for lambda in [0.0, 0.4, 1.0] {
            let w = exact_fixed_point(&chain, &TabularFeatures { n_states: 2 }, lambda, gamma).unwrap();
            assert_abs_diff_eq!(w, v, epsilon = 1e-10);
        }
    }

    #[test]
    fn td_one_fixed_point_is_projection() {
        let chain = two_state_chain();
        let feats = MatrixFeatures { rows: DMatrix::from_row_slice(2, 1, &[1.0, 2.0]) };
        let gamma = 0.8;
        let w = exact_fixed_point(&chain, &feats, 1.0, gamma).unwrap();
        let check = error_bound_check(&chain, &feats, 1.0, gamma).unwrap();
        // λ = 1: the bound factor is one and holds with equality
        assert_abs_diff_eq!(check.lhs, check.rhs, epsilon = 1e-10);
        let d = stationary_distribution(chain.transition()).unwrap();
        let v = true_values(&chain, gamma).unwrap();
        // weighted least-squares projection onto span{[1, 2]}
        let proj = (d[0] * v[0] + 2.0 * d[1] * v[1]) / (d[0] + 4.0 * d[1]);
        assert_abs_diff_eq!(w[0], proj, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficient_features_are_reported() {
        let chain = two_state_chain();
        let feats = MatrixFeatures { rows: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]) };
        assert!(matches!(
            exact_fixed_point(&chain, &feats, 0.5, 0.9),
            Err(Error::RankDeficient { rank: 1, dim: 2 })
        ));
    }

    #[test]
    fn bound_is_tight_when_values_are_representable() {
        let tabular = TabularFeatures { n_states: 13 };
        let check = error_bound_check(&hopworld(), &tabular, 0.0, 0.9).unwrap();
        assert!(check.holds);
        assert!(check.lhs < 1e-9 && check.rhs < 1e-9);
        assert!(error_bound_check(&hopworld(), &HopWorldFeatures, 0.0, 1.0).is_err());
    }

    #[test]
    fn stationary_distribution_is_invariant() {
        let chain = two_state_chain();
        let pi = stationary_distribution(chain.transition()).unwrap();
        assert_abs_diff_eq!(pi.sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chain.transition().transpose() * &pi, pi, epsilon = 1e-12);
    }
}
