//! Optimal allocation of experiment effort across k fixed conditions.
//!
//! Given k candidate conditions, each contributing a nonnegative-definite
//! information component `A_l` (usually the rank-one `x_l x_l'` of a
//! regression point), the crate finds the weight vector `w` on the
//! probability simplex that optimizes the combined information matrix
//!
//! ```text
//! S(w) = sum_l w_l A_l
//! ```
//!
//! under the D-criterion (maximize `log det S`) or the A-criterion
//! (minimize `trace S^-1`). The solvers are multiplicative fixed-point
//! iterations: each step rescales every weight by a normalized
//! sensitivity and stays on the simplex by construction, with no step
//! sizes or projections to tune. See [`solver`] for the update formulas
//! and their guarantees.
//!
//! The crate is organized around one flow:
//!
//! - [`design`]: problem construction ([`DesignProblem`], [`Allocation`])
//!   plus objectives and sensitivities;
//! - [`solver`]: the D and A iterations ([`solve`], [`d_step`],
//!   [`a_step`]) and integer rounding ([`apportion`]);
//! - [`verify`]: independent certification (optimality-condition
//!   residuals, an exhaustive lattice oracle, efficiency ratios, the
//!   improvement-bound audit);
//! - [`bench`]: the seeded random simulation harness;
//! - [`linalg`]: the small dense symmetric kernel underneath it all.
//!
//! Everything numeric is generic over a [`Scalar`] (`f64` by default,
//! `f32` works) and deterministic: no global state, no hidden RNG, and
//! parallel benchmark replications are seeded individually so thread
//! scheduling never changes a number.
//!
//! ```
//! use optalloc::{from_points, solve, Criterion, DesignPoint, DesignProblem, SolverConfig};
//!
//! let problem: DesignProblem = from_points(vec![
//!     DesignPoint::new(vec![1.0, -1.0])?,
//!     DesignPoint::new(vec![1.0, 0.0])?,
//!     DesignPoint::new(vec![1.0, 1.0])?,
//! ])?;
//! let report = solve(&problem, &SolverConfig::new(Criterion::DOptimal))?;
//! assert!(report.converged);
//! // Extreme conditions carry the weight; the middle one is dropped.
//! assert!((report.weights.weights()[0] - 0.5).abs() < 1e-3);
//! assert!(report.weights.weights()[1] < 1e-3);
//! # Ok::<(), optalloc::Error>(())
//! ```

pub mod bench;
pub mod design;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod solver;
pub mod verify;

pub use bench::{
    emit_table, generate_problem, replication_seed, run_benchmark, BenchCell, BenchSpec,
    TableFormat,
};
pub use design::{
    a_objective, a_sensitivities, a_sensitivity, check_independence, d_objective,
    d_sensitivities, d_sensitivity, fisher_information, from_points, Allocation, DesignPoint,
    DesignProblem, InfoMatrix, InformationComponent, ProblemJson,
};
pub use error::{Error, Result};
pub use linalg::{row_rank, Cholesky, Matrix};
pub use scalar::Scalar;
pub use solver::{
    a_step, apportion, d_step, solve, Criterion, IterationRecord, SolveReport, SolverConfig,
};
pub use verify::{
    d_efficiency, grid_oracle, kkt_residual_a, kkt_residual_d, monotonicity_audit, KktCondition,
    KktReport, DEFAULT_SUPPORT_TOLERANCE,
};
