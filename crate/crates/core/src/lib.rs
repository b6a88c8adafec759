//! Spectral analysis toolkit for stochastic exchange models on finite
//! weighted graphs.
//!
//! An exchange model redistributes unit mass across the vertices of a graph:
//! at random times a pair `(x, y)` draws a random stochastic 2x2 matrix and
//! applies it to the pair `(eta_x, eta_y)`. The law of the matrix is encoded
//! by a pair measure `beta_xy(du, dv)`, and three named families are built
//! in (heat-bath redistribution, the harmonic process with its infinite jump
//! measure, and the immediate exchange model), next to user-supplied
//! discrete kernels.
//!
//! The crate computes, exactly at machine precision:
//!
//! * single-particle random-walk quantities: jump rates, the stationary
//!   distribution, and the random-walk spectral gap;
//! * the kinetic factor `gamma`, the edge-wise ratio that multiplies the
//!   random-walk gap in the universal lower bound for the full process;
//! * the `k`-particle generators `L_k` on occupation vectors, their
//!   invariant weights, adjoints, and full spectra per level, including the
//!   eigenvalues that are new at each level;
//! * the hidden-parameter (dual) dynamics at the level of polynomial
//!   coefficients, with executable checks of the variance drift identity,
//!   the duality shift identity, and the lift of particle eigenvectors to
//!   polynomial eigenfunctions;
//! * Gillespie simulation of both the mass dynamics and its dual, with
//!   seeded reproducibility, decay-rate estimation, and statistical duality
//!   checks.
//!
//! The crate is deliberately dense-matrix based: the state spaces that
//! matter here are small (thousands of configurations), and dense solvers
//! keep every number deterministic.

pub mod error;
pub mod hidden;
pub mod kernels;
pub mod model;
pub mod montecarlo;
pub mod particles;
pub mod report;
pub mod spectral;

mod dense;

pub use error::{Error, Result};

/// Default cap on the number of `k`-particle configurations enumerated per
/// level. Guards against accidentally huge dense generators.
pub const DEFAULT_STATE_CAP: usize = 20_000;

/// Default maximum particle level for spectrum and verification commands.
pub const DEFAULT_K_MAX: usize = 3;
