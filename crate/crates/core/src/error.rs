//! Unified error type for the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the library.
///
/// Variants are grouped by origin: input handling, model validation,
/// resource caps, and numerical failures that indicate an inconsistent
/// model or a library bug rather than bad user input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read model file: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed model file: {0}")]
    Parse(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state space too large: {states} configurations exceed the cap of {cap}")]
    TooLarge { states: u128, cap: usize },

    #[error("divergent moment encountered while assembling rates: {0}")]
    InfiniteRate(String),

    #[error("stationary distribution solve failed: {0}")]
    SingularSystem(String),

    #[error("no pair carries positive edge measure")]
    NoEdges,

    #[error("operation requires a named kernel family, got {0}")]
    UnsupportedFamily(String),

    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),

    #[error("symmetrized generator has asymmetry residual {residual:.3e}, expected reversible structure")]
    AsymmetryDetected { residual: f64 },

    #[error("eigenvalue multiset matching failed: {0}")]
    MatchFailure(String),

    #[error("invariant measure null-space solve failed: {0}")]
    NullVectorNotUnique(String),

    #[error("no eigenvalues outside the lifted range at level {k}")]
    ComplementEmpty { k: usize },

    #[error("truncated jump mass {mass:.3e} exceeds the simulation rate cap")]
    RateOverflow { mass: f64 },

    #[error("decay window degenerate: {0}")]
    DegenerateWindow(String),
}
