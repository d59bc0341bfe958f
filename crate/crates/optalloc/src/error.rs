//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong when building problems or running solvers.
///
/// Payload values are reported as `f64` regardless of the scalar type in
/// use; they exist for diagnostics, not for further computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A vector or matrix did not have the expected dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An input entry was NaN or infinite.
    #[error("non-finite entry in input")]
    NonFinite,

    /// An information component was asymmetric beyond repair tolerance.
    ///
    /// Asymmetry up to 1e-8 relative is silently symmetrized; anything
    /// larger is rejected as genuinely malformed input.
    #[error("matrix asymmetry {relative:e} exceeds the 1e-8 repair tolerance")]
    Asymmetric { relative: f64 },

    /// An information component had an eigenvalue below the negativity
    /// tolerance (-1e-10 times the spectral norm).
    #[error("matrix is not nonnegative definite (min eigenvalue {min_eigenvalue:e})")]
    NotNonnegativeDefinite { min_eigenvalue: f64 },

    /// The sum of all information components is singular, so no allocation
    /// can be informative over the full parameter set.
    #[error("the component sum is singular: no allocation spans all {p} parameters")]
    SingularComponentSum { p: usize },

    /// The information matrix at the requested weights is not positive
    /// definite (a pivot fell below 1e-12 times the largest diagonal entry).
    #[error("information matrix is singular or not positive definite")]
    SingularInformation,

    /// A problem description violated the input schema (for example both
    /// `points` and `components` present, or neither).
    #[error("problem schema: {reason}")]
    SchemaViolation { reason: String },

    /// A weight vector violated the allocation invariants.
    #[error("invalid allocation: {reason}")]
    InvalidAllocation { reason: String },

    /// A solver configuration field was out of range.
    #[error("invalid solver configuration: {reason}")]
    InvalidConfig { reason: String },

    /// The brute-force oracle was asked for a lattice it refuses to walk
    /// (more than four conditions, or resolution finer than 1e-3).
    #[error("grid oracle limit exceeded: k = {k}, resolution = {resolution:e}")]
    ProblemTooLarge { k: usize, resolution: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
