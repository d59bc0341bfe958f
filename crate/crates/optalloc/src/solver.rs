//! Multiplicative fixed-point solvers for D- and A-optimal allocations.
//!
//! Both criteria share one loop shape. Starting from strictly positive
//! weights, every iteration rescales each weight by a normalized
//! sensitivity of its condition:
//!
//! ```text
//! D:  w_l <- w_l * trace(A_l S^-1) / p
//! A:  w_l <- (w_l / p) * (trace(S^-1 A_l S^-1) / trace(S^-1) + p - 1)
//! ```
//!
//! The weighted mean of the D multiplier is exactly 1, and likewise for
//! the damped A multiplier, so both updates preserve the simplex
//! analytically; the implementation divides by the computed sum anyway to
//! pin the floating-point sum at one. Zero weights have zero multiplier
//! effect and stay exactly zero, which is why the support can only
//! shrink, and why initial weights must be strictly positive.
//!
//! Iteration stops when `max_l |w_l - w_l_prev|` falls below the
//! configured tolerance, or when the iteration cap is reached (reported
//! as `converged = false`, never an error). Each D step is audited
//! against the quadratic improvement bound
//! `delta log det >= (p/2) (sum_l |delta w_l|)^2`, which is a proven
//! guarantee; for the A criterion the per-step objective decrease is
//! only an empirical regularity, so violations are counted and reported
//! but never promoted to an error.

use std::time::Instant;

use serde::Serialize;

use crate::design::{
    a_sensitivities, check_independence, d_sensitivities, fisher_information, Allocation,
    DesignProblem, InfoMatrix,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::verify::{kkt_residual_a, kkt_residual_d, DEFAULT_SUPPORT_TOLERANCE};

/// Slack allowed before a monotonicity bound counts as violated.
const MONOTONE_SLACK: f64 = 1e-9;

/// Which scalarization of the information matrix to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    /// Maximize `log det S(w)`.
    #[serde(rename = "d")]
    DOptimal,
    /// Minimize `trace S(w)^-1`.
    #[serde(rename = "a")]
    AOptimal,
}

impl Criterion {
    /// Short flag-style name ("d" or "a").
    pub fn short_name(self) -> &'static str {
        match self {
            Criterion::DOptimal => "d",
            Criterion::AOptimal => "a",
        }
    }
}

/// Everything a solve run needs besides the problem itself.
#[derive(Debug, Clone)]
pub struct SolverConfig<S = f64> {
    /// Criterion to optimize.
    pub criterion: Criterion,
    /// Stopping tolerance on the max absolute weight change per step.
    pub tolerance: S,
    /// Hard cap on iterations; hitting it means `converged = false`.
    pub max_iterations: usize,
    /// Starting allocation; uniform when absent. Every weight must be
    /// strictly positive, because a zero start is permanently excluded
    /// by the multiplicative updates.
    pub initial: Option<Allocation<S>>,
    /// Record the full per-iteration trace in the report.
    pub record_trace: bool,
    /// Lower floor applied to every weight after each step (then
    /// renormalized). Zero, the default, disables the floor and lets
    /// weights decay freely toward zero.
    pub floor: S,
}

impl<S: Scalar> SolverConfig<S> {
    /// Defaults: tolerance 1e-4, cap 100000, uniform start, no trace,
    /// no floor.
    pub fn new(criterion: Criterion) -> Self {
        SolverConfig {
            criterion,
            tolerance: S::from_f64(1e-4),
            max_iterations: 100_000,
            initial: None,
            record_trace: false,
            floor: S::zero(),
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if !(self.tolerance > S::zero()) || !self.tolerance.is_finite() {
            return Err(Error::InvalidConfig { reason: "tolerance must be a positive real".into() });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig { reason: "max_iterations must be at least 1".into() });
        }
        if !(self.floor >= S::zero()) {
            return Err(Error::InvalidConfig { reason: "floor must be nonnegative".into() });
        }
        if self.floor * S::from_f64(k as f64) > S::one() {
            return Err(Error::InvalidConfig {
                reason: format!("floor {} is infeasible for {k} conditions", self.floor),
            });
        }
        if let Some(ref init) = self.initial {
            if init.len() != k {
                return Err(Error::InvalidConfig {
                    reason: format!("initial allocation has {} weights, problem has {k}", init.len()),
                });
            }
            if init.weights().iter().any(|w| !(*w > S::zero())) {
                return Err(Error::InvalidConfig {
                    reason: "initial weights must all be strictly positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// One recorded iteration of a solve.
///
/// Record 0 is the starting allocation (zero deltas); record h >= 1
/// describes the state after step h. `bound_slack` is the margin of the
/// quadratic improvement bound and only exists for D steps.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord<S = f64> {
    /// Iteration index; 0 is the initial state.
    pub h: usize,
    /// Allocation after this step.
    pub weights: Allocation<S>,
    /// Criterion objective at these weights.
    pub objective: S,
    /// `max_l |w_l - w_l_prev|`, the stopping statistic.
    pub max_abs_delta: S,
    /// `sum_l |w_l - w_l_prev|`, used by the improvement bound.
    pub l1_delta: S,
    /// `delta objective - (p/2) l1_delta^2` for D steps; absent for the
    /// initial record and for A steps.
    pub bound_slack: Option<S>,
}

/// Final state and diagnostics of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport<S = f64> {
    /// Criterion that was optimized.
    pub criterion: Criterion,
    /// Final allocation.
    pub weights: Allocation<S>,
    /// Steps actually taken (at most `max_iterations`).
    pub iterations: usize,
    /// Whether the stopping tolerance was met within the cap.
    pub converged: bool,
    /// Criterion objective at the final allocation.
    pub objective: S,
    /// Optimality-condition residual of the final allocation at the
    /// default support tolerance.
    pub kkt_residual: S,
    /// Wall-clock seconds spent inside `solve`.
    pub elapsed_seconds: f64,
    /// Count of monotonicity violations: D steps breaking the quadratic
    /// improvement bound by more than 1e-9, or A steps increasing the
    /// objective by more than 1e-9 relative.
    pub monotone_violations: usize,
    /// Per-iteration records when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<IterationRecord<S>>>,
    /// Whether the components passed the linear-independence check, which
    /// is what guarantees a unique optimum. Diagnostic only; not part of
    /// the serialized report.
    #[serde(skip)]
    pub independent: bool,
}

/// Result of one multiplicative step: the new allocation plus the deltas
/// the stopping rule and the audits need.
struct StepOutcome<S> {
    weights: Vec<S>,
    max_abs_delta: S,
    l1_delta: S,
}

fn multiplicative_step<S: Scalar>(
    problem: &DesignProblem<S>,
    info: &InfoMatrix<S>,
    w: &[S],
    criterion: Criterion,
    floor: S,
) -> Result<StepOutcome<S>> {
    let p = S::from_f64(problem.p() as f64);
    let multipliers: Vec<S> = match criterion {
        Criterion::DOptimal => d_sensitivities(problem, info)?
            .into_iter()
            .map(|s| s / p)
            .collect(),
        Criterion::AOptimal => a_sensitivities(problem, info)?
            .into_iter()
            .map(|t| (t + p - S::one()) / p)
            .collect(),
    };
    let mut new_w: Vec<S> = w.iter().zip(&multipliers).map(|(wl, m)| *wl * *m).collect();
    if floor > S::zero() {
        for x in &mut new_w {
            *x = x.max(floor);
        }
    }
    // The update preserves the simplex analytically (the weighted mean of
    // every multiplier is one); dividing by the computed sum removes the
    // accumulated round-off so the invariant |sum - 1| <= 1e-10 holds over
    // arbitrarily many iterations. Exact zeros are unaffected.
    let sum: S = new_w.iter().copied().sum();
    let inv_sum = S::one() / sum;
    for x in &mut new_w {
        *x *= inv_sum;
    }
    let mut max_abs_delta = S::zero();
    let mut l1_delta = S::zero();
    for (new, old) in new_w.iter().zip(w) {
        let d = (*new - *old).abs();
        max_abs_delta = max_abs_delta.max(d);
        l1_delta += d;
    }
    Ok(StepOutcome { weights: new_w, max_abs_delta, l1_delta })
}

/// One D-criterion update from `w`.
///
/// Zero weights stay zero; the output is on the simplex up to round-off.
pub fn d_step<S: Scalar>(problem: &DesignProblem<S>, w: &Allocation<S>) -> Result<Allocation<S>> {
    let info = fisher_information(problem, w)?;
    let out = multiplicative_step(problem, &info, w.weights(), Criterion::DOptimal, S::zero())?;
    Ok(Allocation::from_normalized(out.weights))
}

/// One A-criterion update from `w`.
///
/// The damped multiplier `(t + p - 1)/p` is nonnegative for any
/// sensitivity `t >= 0`, so weights never change sign.
pub fn a_step<S: Scalar>(problem: &DesignProblem<S>, w: &Allocation<S>) -> Result<Allocation<S>> {
    let info = fisher_information(problem, w)?;
    let out = multiplicative_step(problem, &info, w.weights(), Criterion::AOptimal, S::zero())?;
    Ok(Allocation::from_normalized(out.weights))
}

fn objective_of<S: Scalar>(info: &InfoMatrix<S>, criterion: Criterion) -> Result<S> {
    match criterion {
        Criterion::DOptimal => info.log_det(),
        Criterion::AOptimal => info.trace_inverse(),
    }
}

/// Runs the multiplicative iteration to convergence or the cap.
///
/// The information matrix at the starting allocation must be positive
/// definite; a singular start is an error, while hitting the iteration
/// cap is an ordinary `converged = false` outcome. The report always
/// carries the final optimality residual, the monotonicity violation
/// count, and whether the components are linearly independent (without
/// independence the optimum needn't be unique, so different starts may
/// reach different optimal allocations).
pub fn solve<S: Scalar>(problem: &DesignProblem<S>, config: &SolverConfig<S>) -> Result<SolveReport<S>> {
    config.validate(problem.k())?;
    let start = Instant::now();
    let independent = check_independence(problem);
    let p = problem.p();

    let mut w: Vec<S> = match config.initial {
        Some(ref init) => init.weights().to_vec(),
        None => Allocation::uniform(problem.k()).weights().to_vec(),
    };
    let mut info = fisher_information(problem, &Allocation::from_normalized(w.clone()))?;
    if !info.is_positive_definite() {
        return Err(Error::SingularInformation);
    }
    let mut objective = objective_of(&info, config.criterion)?;

    let mut trace = if config.record_trace {
        Some(vec![IterationRecord {
            h: 0,
            weights: Allocation::from_normalized(w.clone()),
            objective,
            max_abs_delta: S::zero(),
            l1_delta: S::zero(),
            bound_slack: None,
        }])
    } else {
        None
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut monotone_violations = 0;
    let slack_tol = S::from_f64(MONOTONE_SLACK);

    for h in 1..=config.max_iterations {
        let step = multiplicative_step(problem, &info, &w, config.criterion, config.floor)?;
        let new_alloc = Allocation::from_normalized(step.weights);
        let new_info = fisher_information(problem, &new_alloc)?;
        if !new_info.is_positive_definite() {
            return Err(Error::SingularInformation);
        }
        let new_objective = objective_of(&new_info, config.criterion)?;

        let bound_slack = match config.criterion {
            Criterion::DOptimal => {
                // Quadratic improvement bound: the log-determinant gain of
                // one step is at least (p/2) times the squared l1 movement.
                let bound = S::from_f64(p as f64 / 2.0) * step.l1_delta * step.l1_delta;
                let slack = (new_objective - objective) - bound;
                if slack < -slack_tol {
                    monotone_violations += 1;
                }
                Some(slack)
            }
            Criterion::AOptimal => {
                // Decrease is conjectural: count increases, assert nothing.
                let allowance = slack_tol * S::one().max(objective.abs());
                if new_objective > objective + allowance {
                    monotone_violations += 1;
                }
                None
            }
        };

        if let Some(ref mut records) = trace {
            records.push(IterationRecord {
                h,
                weights: new_alloc.clone(),
                objective: new_objective,
                max_abs_delta: step.max_abs_delta,
                l1_delta: step.l1_delta,
                bound_slack,
            });
        }

        w = new_alloc.weights().to_vec();
        info = new_info;
        objective = new_objective;
        iterations = h;

        if step.max_abs_delta < config.tolerance {
            converged = true;
            break;
        }
    }

    let final_alloc = Allocation::from_normalized(w);
    let kkt = match config.criterion {
        Criterion::DOptimal => {
            kkt_residual_d(problem, &final_alloc, S::from_f64(DEFAULT_SUPPORT_TOLERANCE))?
        }
        Criterion::AOptimal => {
            kkt_residual_a(problem, &final_alloc, S::from_f64(DEFAULT_SUPPORT_TOLERANCE))?
        }
    };

    Ok(SolveReport {
        criterion: config.criterion,
        weights: final_alloc,
        iterations,
        converged,
        objective,
        kkt_residual: kkt.residual,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        monotone_violations,
        trace,
        independent,
    })
}

/// Rounds an allocation to integer unit counts summing to `n`.
///
/// Largest-remainder rule: every condition gets `floor(n w_l)` units and
/// the leftover units go to the largest fractional remainders, ties to
/// the lowest index.
pub fn apportion<S: Scalar>(w: &Allocation<S>, n: u64) -> Vec<u64> {
    assert!(n >= 1, "cannot apportion zero units");
    let quotas: Vec<S> = w.weights().iter().map(|wl| *wl * S::from_f64(n as f64)).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor().into_f64() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let leftover = n.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // Sort by remainder descending; sort_by is stable, so equal remainders
    // keep index order and ties resolve to the lowest index.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).expect("remainders are finite")
    });
    for &idx in order.iter().take(leftover as usize) {
        counts[idx] += 1;
    }
    counts
}
