use thiserror::Error;

/// Errors raised by the learners, chain analysis and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("input out of domain: {0}")]
    Domain(String),

    /// The RLS gain denominator `mu + dphi' P z` vanished; the update was rejected.
    #[error("near-singular RLS update: |denominator| = {denominator:e}")]
    NearSingularUpdate { denominator: f64 },

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    #[error("matrix is rank deficient: rank {rank} of {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("trajectory exceeded {steps} steps without absorbing")]
    RunawayChain { steps: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
