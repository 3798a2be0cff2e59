//! Linear temporal-difference learners built on recursive least squares,
//! the Fast-AHC actor-critic controller, and the three benchmark tasks used
//! to exercise them (the Hop-World chain, cart-pole balancing and acrobot
//! swing-up).
//!
//! The crate is organised bottom-up:
//!
//! * [`features`] maps states to linear feature vectors (interpolated
//!   Hop-World features and hashed CMAC tile coding).
//! * [`markov`] holds finite Markov reward chains, trajectory sampling and
//!   the analytic TD(λ) fixed point used as an oracle.
//! * [`predictors`] implements TD(λ), LS-TD(λ) and RLS-TD(λ).
//! * [`dynamics`] simulates the cart-pole and the acrobot.
//! * [`actor_critic`] wires a Gaussian linear actor to a pluggable critic.
//! * [`harness`] runs seeded experiments and writes CSV results.

pub mod actor_critic;
pub mod dynamics;
pub mod error;
pub mod features;
pub mod harness;
pub mod markov;
pub mod predictors;

pub use error::{Error, Result};
pub use features::{Cmac, CmacConfig, FeatureVector, Featurizer, HopWorldFeatures};
pub use markov::{MarkovChain, Transition};
pub use predictors::{
    EligibilityTrace, LstdLambda, RlsTdConfig, RlsTdLambda, StepSizeSchedule, TdLambda,
    ValueLearner,
};
