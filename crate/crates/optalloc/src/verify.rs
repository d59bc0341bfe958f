//! Optimality certification, the exhaustive lattice oracle, efficiency
//! ratios, and the improvement-bound audit.
//!
//! A candidate allocation w* is D-optimal iff its sensitivities satisfy
//!
//! ```text
//! trace(A_l S^-1(w*)) = p   where w*_l > 0
//! trace(A_l S^-1(w*)) <= p  where w*_l = 0
//! ```
//!
//! and A-optimal iff the analogous conditions hold for the normalized
//! sensitivities `trace(S^-1 A_l S^-1) / trace(S^-1)` with bound 1. The
//! residual reported here is the worst pointwise violation: the absolute
//! gap on the support, the positive part off it. Exact zeros are a
//! numerical fiction, so a support tolerance decides which weights count
//! as active.
//!
//! The lattice oracle knows nothing about sensitivities: it enumerates
//! every allocation with weights on a fixed grid and returns the best,
//! which makes it an independent check on the solvers for small k.

use serde::Serialize;

use crate::design::{
    a_sensitivities, d_objective, d_sensitivities, fisher_information, Allocation, DesignProblem,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::{Criterion, IterationRecord};

/// Weights at or below this threshold are treated as off the support
/// when classifying optimality conditions.
pub const DEFAULT_SUPPORT_TOLERANCE: f64 = 1e-6;

/// Slack allowed before an audited improvement bound counts as violated.
const AUDIT_SLACK: f64 = 1e-9;

/// Largest condition count the lattice oracle accepts.
const ORACLE_MAX_K: usize = 4;

/// Coarsest-allowed lattice spacing is 1; finer than this is refused.
const ORACLE_MIN_RESOLUTION: f64 = 1e-3;

/// One condition's share of an optimality check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KktCondition<S = f64> {
    /// Raw sensitivity of the condition (bound p for D, 1 for A).
    pub sensitivity: S,
    /// Whether the weight exceeded the support tolerance.
    pub active: bool,
}

/// Pointwise optimality-condition check of one allocation.
#[derive(Debug, Clone, Serialize)]
pub struct KktReport<S = f64> {
    /// Worst violation over all conditions; 0 at an exact optimum.
    pub residual: S,
    /// Per-condition sensitivity and support classification.
    pub per_condition: Vec<KktCondition<S>>,
    /// Threshold that separated active from inactive weights.
    pub support_tolerance: S,
}

fn assemble_report<S: Scalar>(
    sensitivities: Vec<S>,
    bound: S,
    w: &Allocation<S>,
    support_tolerance: S,
) -> Result<KktReport<S>> {
    if !(support_tolerance >= S::zero()) {
        return Err(Error::InvalidConfig {
            reason: "support tolerance must be nonnegative".into(),
        });
    }
    let mut residual = S::zero();
    let per_condition: Vec<KktCondition<S>> = sensitivities
        .into_iter()
        .zip(w.weights())
        .map(|(sensitivity, wl)| {
            let active = *wl > support_tolerance;
            let gap = sensitivity / bound - S::one();
            let violation = if active { gap.abs() } else { gap.max(S::zero()) };
            residual = residual.max(violation);
            KktCondition { sensitivity, active }
        })
        .collect();
    Ok(KktReport { residual, per_condition, support_tolerance })
}

/// Checks the D-optimality conditions at `w`.
///
/// At a D-optimum every active sensitivity equals p and every inactive
/// one is at most p, so the residual is `max(|d_l/p - 1|)` over active
/// conditions joined with the positive part off the support.
pub fn kkt_residual_d<S: Scalar>(
    problem: &DesignProblem<S>,
    w: &Allocation<S>,
    support_tolerance: S,
) -> Result<KktReport<S>> {
    let info = fisher_information(problem, w)?;
    let sens = d_sensitivities(problem, &info)?;
    assemble_report(sens, S::from_f64(problem.p() as f64), w, support_tolerance)
}

/// Checks the A-optimality conditions at `w`.
///
/// The normalized sensitivities are bounded by 1 instead of p; otherwise
/// the residual is assembled exactly as in the D check.
pub fn kkt_residual_a<S: Scalar>(
    problem: &DesignProblem<S>,
    w: &Allocation<S>,
    support_tolerance: S,
) -> Result<KktReport<S>> {
    let info = fisher_information(problem, w)?;
    let sens = a_sensitivities(problem, &info)?;
    assemble_report(sens, S::one(), w, support_tolerance)
}

/// Exhaustive search over the simplex lattice with the given spacing.
///
/// Enumerates every allocation whose weights are multiples of the lattice
/// step (`1/round(1/resolution)`), skips the ones with a singular
/// information matrix, and returns the best along with its objective
/// (`log det` maximized for D, `trace` of the inverse minimized for A).
/// Ties keep the lexicographically smallest allocation. Exists to certify
/// the solvers on small instances, so it refuses k > 4 or spacing finer
/// than 1e-3 with `ProblemTooLarge`, and reports `SingularInformation` in
/// the degenerate case where no lattice point is feasible.
pub fn grid_oracle<S: Scalar>(
    problem: &DesignProblem<S>,
    criterion: Criterion,
    resolution: f64,
) -> Result<(Allocation<S>, S)> {
    let k = problem.k();
    if k > ORACLE_MAX_K || !(resolution >= ORACLE_MIN_RESOLUTION) {
        return Err(Error::ProblemTooLarge { k, resolution });
    }
    let steps = ((1.0 / resolution).round() as usize).max(1);

    let mut counts = vec![0usize; k];
    let mut best: Option<(Vec<S>, S)> = None;
    visit_compositions(&mut counts, steps, 0, &mut |counts| {
        let weights: Vec<S> =
            counts.iter().map(|c| S::from_f64(*c as f64 / steps as f64)).collect();
        let alloc = Allocation::from_normalized(weights);
        let info = fisher_information(problem, &alloc).expect("lattice lengths match k");
        if !info.is_positive_definite() {
            return;
        }
        let objective = match criterion {
            Criterion::DOptimal => info.log_det().expect("factorization exists"),
            Criterion::AOptimal => info.trace_inverse().expect("factorization exists"),
        };
        let improves = match &best {
            None => true,
            // Strict comparison keeps the first (lexicographically
            // smallest) of any tied allocations.
            Some((_, incumbent)) => match criterion {
                Criterion::DOptimal => objective > *incumbent,
                Criterion::AOptimal => objective < *incumbent,
            },
        };
        if improves {
            best = Some((alloc.weights().to_vec(), objective));
        }
    });

    match best {
        Some((weights, objective)) => Ok((Allocation::from_normalized(weights), objective)),
        None => Err(Error::SingularInformation),
    }
}

/// Calls `eval` for every way of writing `remaining` as an ordered sum of
/// `counts.len() - depth` nonnegative integers, in ascending
/// lexicographic order.
fn visit_compositions(
    counts: &mut Vec<usize>,
    remaining: usize,
    depth: usize,
    eval: &mut impl FnMut(&[usize]),
) {
    if depth + 1 == counts.len() {
        counts[depth] = remaining;
        eval(counts);
        return;
    }
    for c in 0..=remaining {
        counts[depth] = c;
        visit_compositions(counts, remaining - c, depth + 1, eval);
    }
}

/// D-efficiency of `w` relative to `w_ref`:
/// `exp((log det S(w) - log det S(w_ref)) / p)`.
///
/// Equals 1 when the allocations match, is below 1 when `w_ref` is
/// better, and is invariant under rescaling all components.
pub fn d_efficiency<S: Scalar>(
    problem: &DesignProblem<S>,
    w: &Allocation<S>,
    w_ref: &Allocation<S>,
) -> Result<S> {
    let ld = d_objective(problem, w)?;
    let ld_ref = d_objective(problem, w_ref)?;
    Ok(((ld - ld_ref) / S::from_f64(problem.p() as f64)).exp())
}

/// Audits a recorded D-criterion trace against the quadratic improvement
/// bound `delta log det >= (p/2) (sum_l |delta w_l|)^2`.
///
/// Returns the number of steps where the bound fails by more than 1e-9
/// together with the smallest observed slack
/// (`delta objective - (p/2) l1_delta^2`). A trace with fewer than two
/// records has nothing to audit and returns `(0, 0)`.
pub fn monotonicity_audit<S: Scalar>(trace: &[IterationRecord<S>], p: usize) -> (usize, S) {
    let half_p = S::from_f64(p as f64 / 2.0);
    let tol = S::from_f64(-AUDIT_SLACK);
    let mut violations = 0;
    let mut min_slack: Option<S> = None;
    for pair in trace.windows(2) {
        let delta = pair[1].objective - pair[0].objective;
        let slack = delta - half_p * pair[1].l1_delta * pair[1].l1_delta;
        if slack < tol {
            violations += 1;
        }
        min_slack = Some(match min_slack {
            None => slack,
            Some(m) => m.min(slack),
        });
    }
    (violations, min_slack.unwrap_or_else(S::zero))
}
