//! State featurisation for the linear learners.
//!
//! Two families are provided: the hand-specified, linearly interpolated
//! features of the Hop-World chain, and hashed CMAC tile coding for the
//! continuous-state control tasks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense feature vector `φ(x)`.
pub type FeatureVector = DVector<f64>;

/// A fixed linear basis over states of type `S`.
pub trait Featurizer<S: ?Sized> {
    /// Number of features `K`.
    fn dim(&self) -> usize;

    fn features(&self, state: &S) -> FeatureVector;
}

impl<S: ?Sized, F: Featurizer<S> + ?Sized> Featurizer<S> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn features(&self, state: &S) -> FeatureVector {
        (**self).features(state)
    }
}

/// Hop-World basis: unit vectors at states 12, 8, 4 and 0, linear
/// interpolation in between.
#[derive(Debug, Clone, Copy, Default)]
pub struct HopWorldFeatures;

impl HopWorldFeatures {
    pub const N_STATES: usize = 13;
    const SPACING: usize = 4;

    pub fn try_features(&self, state: usize) -> Result<FeatureVector> {
        if state >= Self::N_STATES {
            return Err(Error::Domain(format!(
                "hop-world state {state} outside 0..=12"
            )));
        }
        let mut phi = DVector::zeros(4);
        // distance below the top anchor, split into anchor slot and remainder
        let depth = Self::N_STATES - 1 - state;
        let slot = depth / Self::SPACING;
        let rem = depth % Self::SPACING;
        phi[slot] = (Self::SPACING - rem) as f64 / Self::SPACING as f64;
        if rem > 0 {
            phi[slot + 1] = rem as f64 / Self::SPACING as f64;
        }
        Ok(phi)
    }
}

impl Featurizer<usize> for HopWorldFeatures {
    fn dim(&self) -> usize {
        4
    }

    /// Panics on a state outside `0..=12`; use [`HopWorldFeatures::try_features`]
    /// for checked access.
    fn features(&self, state: &usize) -> FeatureVector {
        self.try_features(*state).expect("hop-world state in range")
    }
}

/// One-hot features over `n` discrete states.
#[derive(Debug, Clone, Copy)]
pub struct TabularFeatures {
    pub n_states: usize,
}

impl Featurizer<usize> for TabularFeatures {
    fn dim(&self) -> usize {
        self.n_states
    }

    fn features(&self, state: &usize) -> FeatureVector {
        let mut phi = DVector::zeros(self.n_states);
        phi[*state] = 1.0;
        phi
    }
}

/// Arbitrary basis given as an `N × K` matrix whose row `i` is `φ(i)ᵀ`.
#[derive(Debug, Clone)]
pub struct MatrixFeatures {
    pub rows: DMatrix<f64>,
}

impl Featurizer<usize> for MatrixFeatures {
    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn features(&self, state: &usize) -> FeatureVector {
        self.rows.row(*state).transpose()
    }
}

/// Builds the `N × K` basis matrix `Φ` for a discrete featurizer.
pub fn basis_matrix<F: Featurizer<usize> + ?Sized>(featurizer: &F, n_states: usize) -> DMatrix<f64> {
    let k = featurizer.dim();
    let mut phi = DMatrix::zeros(n_states, k);
    for s in 0..n_states {
        phi.set_row(s, &featurizer.features(&s).transpose());
    }
    phi
}

/// How tile indices are folded into one memory address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hashing {
    /// `A(s) = Σ_i (a(i) + M^(i-1))`
    Additive,
    /// `A(s) = Σ_i a(i) · M^(i-1)`
    Positional,
}

/// Partition of one input range into `M` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionEdges {
    Uniform,
    /// `M + 1` strictly increasing edges starting at `lo` and ending at `hi`.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmacConfig {
    pub tilings: usize,
    pub partitions: usize,
    pub bounds: Vec<[f64; 2]>,
    pub partition_edges: Vec<PartitionEdges>,
    pub memory_size: usize,
    pub hashing: Hashing,
    /// Per tiling, per dimension shift in units of one tile. Defaults to
    /// `c / C` for tiling `c` in every dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiling_offsets: Option<Vec<Vec<f64>>>,
}

impl CmacConfig {
    pub fn uniform(
        tilings: usize,
        partitions: usize,
        bounds: Vec<[f64; 2]>,
        memory_size: usize,
        hashing: Hashing,
    ) -> Self {
        let n = bounds.len();
        CmacConfig {
            tilings,
            partitions,
            bounds,
            partition_edges: vec![PartitionEdges::Uniform; n],
            memory_size,
            hashing,
            tiling_offsets: None,
        }
    }

    /// Input order is `(θ, θ̇, x, ẋ)`, angles in radians.
    fn cartpole_bounds() -> Vec<[f64; 2]> {
        let deg = std::f64::consts::PI / 180.0;
        vec![[-12.0 * deg, 12.0 * deg], [-50.0 * deg, 50.0 * deg], [-2.4, 2.4], [-1.0, 1.0]]
    }

    pub fn cartpole_critic() -> Self {
        Self::uniform(4, 7, Self::cartpole_bounds(), 30, Hashing::Additive)
    }

    pub fn cartpole_actor() -> Self {
        Self::uniform(4, 7, Self::cartpole_bounds(), 100, Hashing::Positional)
    }

    /// Input order is `(θ1, θ̇1, θ2, θ̇2)`.
    fn acrobot_bounds() -> Vec<[f64; 2]> {
        use std::f64::consts::PI;
        vec![[-PI, PI], [-4.0 * PI, 4.0 * PI], [-PI, PI], [-9.0 * PI, 9.0 * PI]]
    }

    pub fn acrobot_actor() -> Self {
        Self::uniform(4, 7, Self::acrobot_bounds(), 100, Hashing::Positional)
    }

    /// Non-uniform coding: seven edges per input, i.e. six intervals.
    pub fn acrobot_critic() -> Self {
        use std::f64::consts::PI;
        let angle = vec![-PI, -1.0, -0.5, 0.0, 0.5, 1.0, PI];
        let edges = vec![
            PartitionEdges::Explicit(angle.clone()),
            PartitionEdges::Explicit(
                [-4.0, -1.5, -0.5, 0.0, 0.5, 1.5, 4.0].iter().map(|v| v * PI).collect(),
            ),
            PartitionEdges::Explicit(angle),
            PartitionEdges::Explicit(
                [-9.0, -2.0, -0.5, 0.0, 0.5, 2.0, 9.0].iter().map(|v| v * PI).collect(),
            ),
        ];
        CmacConfig {
            tilings: 4,
            partitions: 6,
            bounds: Self::acrobot_bounds(),
            partition_edges: edges,
            memory_size: 80,
            hashing: Hashing::Positional,
            tiling_offsets: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.tilings == 0 || self.partitions == 0 || self.memory_size == 0 {
            return bad("tilings, partitions and memory_size must be positive".into());
        }
        if self.bounds.is_empty() {
            return bad("CMAC needs at least one input dimension".into());
        }
        if self.partition_edges.len() != self.bounds.len() {
            return bad(format!(
                "{} partition specs for {} dimensions",
                self.partition_edges.len(),
                self.bounds.len()
            ));
        }
        for (d, ([lo, hi], edges)) in self.bounds.iter().zip(&self.partition_edges).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("dimension {d}: bounds [{lo}, {hi}] not increasing"));
            }
            if let PartitionEdges::Explicit(e) = edges {
                if e.len() != self.partitions + 1 {
                    return bad(format!(
                        "dimension {d}: {} edges, expected {}",
                        e.len(),
                        self.partitions + 1
                    ));
                }
                if e.windows(2).any(|w| w[0] >= w[1]) {
                    return bad(format!("dimension {d}: edges not strictly increasing"));
                }
                if e[0] != *lo || e[e.len() - 1] != *hi {
                    return bad(format!("dimension {d}: edges must start at lo and end at hi"));
                }
            }
        }
        if let Some(offsets) = &self.tiling_offsets {
            if offsets.len() != self.tilings
                || offsets.iter().any(|o| o.len() != self.bounds.len())
            {
                return bad("tiling_offsets must be tilings × dimensions".into());
            }
        }
        Ok(())
    }
}

/// Folds per-dimension tile indices into a memory address.
pub fn hash_tiles(tiles: &[usize], partitions: usize, hashing: Hashing, memory_size: usize) -> usize {
    let m = partitions as u64;
    let mut place = 1u64;
    let mut address = 0u64;
    for &a in tiles {
        address += match hashing {
            Hashing::Additive => a as u64 + place,
            Hashing::Positional => a as u64 * place,
        };
        place *= m;
    }
    (address % memory_size as u64) as usize
}

/// Hashed CMAC tile coder. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Cmac {
    config: CmacConfig,
    offsets: Vec<Vec<f64>>,
}

impl Cmac {
    pub fn new(config: CmacConfig) -> Result<Self> {
        config.validate()?;
        let offsets = config.tiling_offsets.clone().unwrap_or_else(|| {
            (0..config.tilings)
                .map(|c| vec![c as f64 / config.tilings as f64; config.bounds.len()])
                .collect()
        });
        Ok(Cmac { config, offsets })
    }

    pub fn config(&self) -> &CmacConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.bounds.len()
    }

    /// Position of `x` in tile units, `[0, M]`, after clipping to bounds.
    fn tile_coordinate(&self, dim: usize, x: f64) -> f64 {
        let [lo, hi] = self.config.bounds[dim];
        let m = self.config.partitions as f64;
        let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        match &self.config.partition_edges[dim] {
            PartitionEdges::Uniform => (x - lo) / (hi - lo) * m,
            PartitionEdges::Explicit(edges) => {
                // last interval whose left edge is <= x
                let j = edges[1..edges.len() - 1].partition_point(|&e| e <= x);
                j as f64 + (x - edges[j]) / (edges[j + 1] - edges[j])
            }
        }
    }

    /// One hashed memory address per tiling; duplicates are allowed.
    pub fn active_cells(&self, state: &[f64]) -> Vec<usize> {
        assert_eq!(state.len(), self.input_dim(), "CMAC input dimension");
        let coords: Vec<f64> =
            state.iter().enumerate().map(|(d, &x)| self.tile_coordinate(d, x)).collect();
        let top = self.config.partitions - 1;
        let mut tiles = vec![0usize; coords.len()];
        self.offsets
            .iter()
            .map(|offset| {
                for (d, u) in coords.iter().enumerate() {
                    tiles[d] = ((u + offset[d]).floor().max(0.0) as usize).min(top);
                }
                hash_tiles(&tiles, self.config.partitions, self.config.hashing, self.config.memory_size)
            })
            .collect()
    }
}

impl Featurizer<[f64]> for Cmac {
    fn dim(&self) -> usize {
        self.config.memory_size
    }

    fn features(&self, state: &[f64]) -> FeatureVector {
        let mut phi = DVector::zeros(self.config.memory_size);
        for cell in self.active_cells(state) {
            phi[cell] += 1.0;
        }
        phi
    }
}
