//! Allocation problems and the information-matrix calculus.
//!
//! An allocation problem is a finite menu of k experimental conditions,
//! each contributing a known p x p nonnegative definite information
//! component `A_l`. Allocating a proportion `w_l` of the experimental
//! budget to condition l yields the information matrix
//!
//! ```text
//! S(w) = w_1 A_1 + w_2 A_2 + ... + w_k A_k
//! ```
//!
//! over the probability simplex `w_l >= 0, sum w_l = 1`. This module owns
//! the problem and allocation types, the two scalarizations of `S(w)`
//! (log-determinant and trace of the inverse), and the per-condition
//! sensitivities whose weighted means are exactly `p` and `1`; those two
//! identities drive both the solvers and the optimality certificates.
//!
//! Constant scaling of the components (measurement units, total sample
//! size) shifts the objectives but cancels from every sensitivity, so
//! solver trajectories are scale invariant. Components are accepted with
//! asymmetry up to 1e-8 relative (and silently symmetrized); anything
//! worse is rejected as malformed input rather than repaired.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{row_rank, Matrix};
use crate::scalar::Scalar;

/// Relative asymmetry up to which an input matrix is repaired.
const ASYMMETRY_RTOL: f64 = 1e-8;
/// Eigenvalue negativity tolerance, relative to the spectral norm.
const NEGATIVITY_RTOL: f64 = 1e-10;
/// Allowed deviation of an allocation's weight sum from one.
const SIMPLEX_ATOL: f64 = 1e-10;

/// One experimental condition given as a covariate vector `x_l`.
///
/// Its information contribution is the rank-one outer product `x_l x_l'`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint<S = f64> {
    coordinates: Vec<S>,
}

impl<S: Scalar> DesignPoint<S> {
    /// Wraps a coordinate vector; every entry must be finite.
    pub fn new(coordinates: Vec<S>) -> Result<Self> {
        if coordinates.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(DesignPoint { coordinates })
    }

    /// Covariate levels of this condition.
    pub fn coordinates(&self) -> &[S] {
        &self.coordinates
    }

    /// Number of covariates (the problem dimension p).
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }
}

/// One condition's p x p information contribution per allocated unit.
///
/// Invariants, enforced at construction: symmetric (after repair of
/// asymmetry at most 1e-8 relative) and nonnegative definite (smallest
/// eigenvalue at least -1e-10 times the spectral norm).
#[derive(Debug, Clone, PartialEq)]
pub struct InformationComponent<S = f64> {
    matrix: Matrix<S>,
}

impl<S: Scalar> InformationComponent<S> {
    /// Validates and stores a component matrix.
    pub fn new(matrix: Matrix<S>) -> Result<Self> {
        if matrix.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let asym = matrix.asymmetry().into_f64();
        if asym > ASYMMETRY_RTOL {
            return Err(Error::Asymmetric { relative: asym });
        }
        let mut matrix = matrix;
        matrix.symmetrize();
        let eig = matrix.symmetric_eigenvalues();
        let min = eig.first().copied().unwrap_or_else(S::zero);
        let max = eig.last().copied().unwrap_or_else(S::zero);
        let spectral = min.abs().max(max.abs());
        if min < -S::from_f64(NEGATIVITY_RTOL) * spectral {
            return Err(Error::NotNonnegativeDefinite { min_eigenvalue: min.into_f64() });
        }
        Ok(InformationComponent { matrix })
    }

    /// Builds from nested rows.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// The component built from a design point, `x x'`: exactly symmetric
    /// and nonnegative definite by construction, so validation is skipped.
    fn from_point(point: &DesignPoint<S>) -> Self {
        InformationComponent { matrix: Matrix::outer(point.coordinates()) }
    }

    /// The stored (symmetrized) matrix.
    pub fn matrix(&self) -> &Matrix<S> {
        &self.matrix
    }
}

/// A complete allocation problem: k conditions over p parameters.
///
/// Construction guarantees that the sum of all components is nonsingular;
/// otherwise no allocation could be informative over the full parameter
/// set. Problems built from design points remember them and route
/// sensitivity evaluations through quadratic forms instead of full trace
/// products (same values within 1e-10, one order cheaper in p).
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct DesignProblem<S = f64> {
    p: usize,
    components: Vec<InformationComponent<S>>,
    points: Option<Vec<DesignPoint<S>>>,
    labels: Option<Vec<String>>,
}

impl<S: Scalar> DesignProblem<S> {
    /// Builds a problem from explicit information components.
    pub fn new(
        p: usize,
        components: Vec<InformationComponent<S>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::SchemaViolation { reason: "p must be at least 1".into() });
        }
        if components.is_empty() {
            return Err(Error::SchemaViolation { reason: "at least one condition required".into() });
        }
        for c in &components {
            if c.matrix().order() != p {
                return Err(Error::DimensionMismatch { expected: p, got: c.matrix().order() });
            }
        }
        if let Some(ref l) = labels {
            if l.len() != components.len() {
                return Err(Error::DimensionMismatch { expected: components.len(), got: l.len() });
            }
        }
        let problem = DesignProblem { p, components, points: None, labels };
        problem.require_nonsingular_sum()?;
        Ok(problem)
    }

    /// Attaches condition labels (must match k).
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    fn require_nonsingular_sum(&self) -> Result<()> {
        let mut sum = Matrix::zeros(self.p);
        for c in &self.components {
            sum.add_scaled(S::one(), c.matrix());
        }
        if sum.cholesky().is_none() {
            return Err(Error::SingularComponentSum { p: self.p });
        }
        Ok(())
    }

    /// Number of conditions k.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Number of parameters p.
    pub fn p(&self) -> usize {
        self.p
    }

    /// All component matrices, in condition order.
    pub fn components(&self) -> &[InformationComponent<S>] {
        &self.components
    }

    /// The design points, when the problem was built from them.
    pub fn points(&self) -> Option<&[DesignPoint<S>]> {
        self.points.as_deref()
    }

    /// Condition labels, when provided.
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Builds the rank-one problem `A_l = x_l x_l'` from k design points.
///
/// All points must share one dimension p >= 1, and together they must span
/// the parameter space (otherwise the component sum is singular).
pub fn from_points<S: Scalar>(points: Vec<DesignPoint<S>>) -> Result<DesignProblem<S>> {
    if points.is_empty() {
        return Err(Error::SchemaViolation { reason: "at least one design point required".into() });
    }
    let p = points[0].dim();
    if p == 0 {
        return Err(Error::SchemaViolation { reason: "design points must have dimension >= 1".into() });
    }
    for pt in &points {
        if pt.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: pt.dim() });
        }
    }
    let components = points.iter().map(InformationComponent::from_point).collect();
    let problem = DesignProblem { p, components, points: Some(points), labels: None };
    problem.require_nonsingular_sum()?;
    Ok(problem)
}

/// A point of the probability simplex: `w_l >= 0`, `sum w_l = 1` within
/// 1e-10.
///
/// Serializes as a bare JSON array of weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Allocation<S = f64> {
    weights: Vec<S>,
}

impl<S: Scalar> Allocation<S> {
    /// Validates a weight vector against the simplex invariants.
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidAllocation { reason: "empty weight vector".into() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidAllocation { reason: "non-finite weight".into() });
        }
        if let Some(w) = weights.iter().find(|w| **w < S::zero()) {
            return Err(Error::InvalidAllocation { reason: format!("negative weight {w}") });
        }
        let sum: S = weights.iter().copied().sum();
        if (sum - S::one()).abs() > S::from_f64(SIMPLEX_ATOL) {
            return Err(Error::InvalidAllocation {
                reason: format!("weights sum to {sum}, not 1 within {SIMPLEX_ATOL:e}"),
            });
        }
        Ok(Allocation { weights })
    }

    /// The uniform allocation 1/k.
    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1, "an allocation needs at least one condition");
        let w = S::one() / S::from_f64(k as f64);
        Allocation { weights: vec![w; k] }
    }

    /// Internal constructor for vectors already normalized by the solver
    /// updates (nonnegative, summed to one by construction).
    pub(crate) fn from_normalized(weights: Vec<S>) -> Self {
        debug_assert!(weights.iter().all(|w| *w >= S::zero()));
        Allocation { weights }
    }

    /// Weight vector.
    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// Number of conditions.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when there are no weights (never holds for a valid value).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// The information matrix `S(w)` with its factorization computed once at
/// construction.
///
/// Construction never fails on a singular matrix; instead the cached
/// factorization is absent and every scalar accessor reports
/// [`Error::SingularInformation`]. There is no interior mutability, so
/// shared references are thread-safe.
#[derive(Debug, Clone)]
pub struct InfoMatrix<S = f64> {
    matrix: Matrix<S>,
    log_det: Option<S>,
    inverse: Option<Matrix<S>>,
}

impl<S: Scalar> InfoMatrix<S> {
    fn build(problem: &DesignProblem<S>, w: &Allocation<S>) -> Result<Self> {
        if w.len() != problem.k() {
            return Err(Error::DimensionMismatch { expected: problem.k(), got: w.len() });
        }
        let mut matrix = Matrix::zeros(problem.p());
        for (weight, comp) in w.weights().iter().zip(problem.components()) {
            if *weight != S::zero() {
                matrix.add_scaled(*weight, comp.matrix());
            }
        }
        let factor = matrix.cholesky();
        let (log_det, inverse) = match factor {
            Some(ref ch) => (Some(ch.log_det()), Some(ch.inverse())),
            None => (None, None),
        };
        Ok(InfoMatrix { matrix, log_det, inverse })
    }

    /// The matrix `S(w)` itself.
    pub fn matrix(&self) -> &Matrix<S> {
        &self.matrix
    }

    /// Whether the factorization succeeded.
    pub fn is_positive_definite(&self) -> bool {
        self.log_det.is_some()
    }

    /// `log det S(w)`, the D-criterion objective (maximize).
    pub fn log_det(&self) -> Result<S> {
        self.log_det.ok_or(Error::SingularInformation)
    }

    /// The cached inverse `S(w)^-1`.
    pub fn inverse(&self) -> Result<&Matrix<S>> {
        self.inverse.as_ref().ok_or(Error::SingularInformation)
    }

    /// `trace S(w)^-1`, the A-criterion objective (minimize).
    pub fn trace_inverse(&self) -> Result<S> {
        Ok(self.inverse()?.trace())
    }
}

/// Assembles `S(w) = sum_l w_l A_l` with its factorization.
///
/// Errors only on a length mismatch between `w` and the problem; a
/// singular result is representable and reported by the accessors.
pub fn fisher_information<S: Scalar>(
    problem: &DesignProblem<S>,
    w: &Allocation<S>,
) -> Result<InfoMatrix<S>> {
    InfoMatrix::build(problem, w)
}

/// `log det S(w)`; requires `S(w)` positive definite.
pub fn d_objective<S: Scalar>(problem: &DesignProblem<S>, w: &Allocation<S>) -> Result<S> {
    fisher_information(problem, w)?.log_det()
}

/// `trace S(w)^-1`; requires `S(w)` positive definite.
pub fn a_objective<S: Scalar>(problem: &DesignProblem<S>, w: &Allocation<S>) -> Result<S> {
    fisher_information(problem, w)?.trace_inverse()
}

/// All k D-sensitivities `trace(A_l S(w)^-1)` for one already-factored
/// information matrix.
///
/// Rank-one problems evaluate the quadratic form `x_l' S^-1 x_l` instead
/// of the full trace product; both routes agree within 1e-10.
///
/// The weighted mean of the returned values is exactly p (the trace of
/// the identity), which is what keeps the multiplicative D-update on the
/// simplex.
pub fn d_sensitivities<S: Scalar>(
    problem: &DesignProblem<S>,
    info: &InfoMatrix<S>,
) -> Result<Vec<S>> {
    let inv = info.inverse()?;
    match problem.points() {
        Some(points) => Ok(points.iter().map(|x| inv.quadratic_form(x.coordinates())).collect()),
        None => Ok(problem
            .components()
            .iter()
            .map(|c| c.matrix().trace_product_sym(inv))
            .collect()),
    }
}

/// All k A-sensitivities `trace(S^-1 A_l S^-1) / trace(S^-1)`.
///
/// Rank-one problems use `x_l' S^-2 x_l = |S^-1 x_l|^2`; general problems
/// form `S^-2` once and take trace products. The weighted mean of the
/// returned values is exactly 1.
pub fn a_sensitivities<S: Scalar>(
    problem: &DesignProblem<S>,
    info: &InfoMatrix<S>,
) -> Result<Vec<S>> {
    let inv = info.inverse()?;
    let trace_inv = inv.trace();
    match problem.points() {
        Some(points) => Ok(points
            .iter()
            .map(|x| {
                let y = inv.mul_vec(x.coordinates());
                y.iter().map(|v| *v * *v).sum::<S>() / trace_inv
            })
            .collect()),
        None => {
            let inv_sq = inv.mul(inv);
            Ok(problem
                .components()
                .iter()
                .map(|c| c.matrix().trace_product_sym(&inv_sq) / trace_inv)
                .collect())
        }
    }
}

/// D-sensitivity of one condition, `trace(A_l S(w)^-1)`.
///
/// `l` is a zero-based condition index. Nonnegative; equals p at every
/// support point of a D-optimal allocation.
pub fn d_sensitivity<S: Scalar>(
    problem: &DesignProblem<S>,
    w: &Allocation<S>,
    l: usize,
) -> Result<S> {
    if l >= problem.k() {
        return Err(Error::DimensionMismatch { expected: problem.k(), got: l });
    }
    let info = fisher_information(problem, w)?;
    Ok(d_sensitivities(problem, &info)?[l])
}

/// A-sensitivity of one condition, `trace(S^-1 A_l S^-1) / trace(S^-1)`.
///
/// `l` is a zero-based condition index. Nonnegative; equals 1 at every
/// support point of an A-optimal allocation.
pub fn a_sensitivity<S: Scalar>(
    problem: &DesignProblem<S>,
    w: &Allocation<S>,
    l: usize,
) -> Result<S> {
    if l >= problem.k() {
        return Err(Error::DimensionMismatch { expected: problem.k(), got: l });
    }
    let info = fisher_information(problem, w)?;
    Ok(a_sensitivities(problem, &info)?[l])
}

/// Whether the components are linearly independent as matrices.
///
/// Vectorizes each component's upper triangle into a row and checks the
/// row rank (one-sided Jacobi, cutoff 1e-10 relative to the largest
/// singular value). More components than the p(p+1)/2 dimensions of
/// symmetric-matrix space can never be independent, so that case returns
/// false without factoring.
///
/// Independence makes the optimal allocation unique; the solvers still
/// run without it, they just cannot promise a unique limit.
pub fn check_independence<S: Scalar>(problem: &DesignProblem<S>) -> bool {
    let p = problem.p();
    let k = problem.k();
    let m = p * (p + 1) / 2;
    if k > m {
        return false;
    }
    let mut rows: Vec<Vec<S>> = problem
        .components()
        .iter()
        .map(|c| {
            let mat = c.matrix();
            let mut row = Vec::with_capacity(m);
            for i in 0..p {
                for j in i..p {
                    row.push(mat[(i, j)]);
                }
            }
            row
        })
        .collect();
    row_rank(&mut rows) == k
}

/// Canonical JSON form of a problem file.
///
/// ```json
/// {"p": 2, "points": [[1.0, -1.0], [1.0, 1.0]]}
/// {"p": 2, "components": [[[1.0, 0.0], [0.0, 0.0]], ...], "labels": ["low", "high"]}
/// ```
///
/// Exactly one of `points` / `components` must be present; `labels` is
/// optional and must have one entry per condition. Unknown fields are
/// rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemJson {
    /// Number of parameters p.
    pub p: usize,
    /// Design points, one row per condition (rank-one components).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Explicit p x p components, one per condition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<Vec<f64>>>>,
    /// Optional condition names.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ProblemJson {
    /// Validates the schema and builds the problem.
    pub fn into_problem(self) -> Result<DesignProblem<f64>> {
        let problem = match (self.points, self.components) {
            (Some(_), Some(_)) => {
                return Err(Error::SchemaViolation {
                    reason: "give either points or components, not both".into(),
                })
            }
            (None, None) => {
                return Err(Error::SchemaViolation {
                    reason: "one of points or components is required".into(),
                })
            }
            (Some(points), None) => {
                let points = points
                    .into_iter()
                    .map(|row| {
                        if row.len() != self.p {
                            return Err(Error::DimensionMismatch { expected: self.p, got: row.len() });
                        }
                        DesignPoint::new(row)
                    })
                    .collect::<Result<Vec<_>>>()?;
                from_points(points)?
            }
            (None, Some(components)) => {
                let components = components
                    .into_iter()
                    .map(|rows| {
                        if rows.len() != self.p {
                            return Err(Error::DimensionMismatch { expected: self.p, got: rows.len() });
                        }
                        if let Some(bad) = rows.iter().find(|r| r.len() != self.p) {
                            return Err(Error::DimensionMismatch { expected: self.p, got: bad.len() });
                        }
                        InformationComponent::from_rows(&rows)
                    })
                    .collect::<Result<Vec<_>>>()?;
                DesignProblem::new(self.p, components, None)?
            }
        };
        match self.labels {
            Some(labels) => problem.with_labels(labels),
            None => Ok(problem),
        }
    }
}
