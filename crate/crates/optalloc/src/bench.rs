//! Seeded simulation harness: random rank-one problems, replicated
//! solves, and table-shaped summaries.
//!
//! A benchmark run sweeps a grid of (k, p) sizes. For each pair with
//! p < k it generates `replications` random problems, with every design
//! coordinate drawn i.i.d. uniform on the open interval (-1, 1), solves
//! each one, and aggregates iteration counts and solve times into one
//! row. Each replication derives its own 64-bit seed from
//! (seed, k, p, replication) through a splitmix64-style mixer, so
//! results are identical across runs, platforms, and thread counts, and
//! any single replication can be reproduced in isolation.
//!
//! Everything here is f64: the harness measures the default solver, not
//! the generic core.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{from_points, DesignPoint, DesignProblem};
use crate::error::{Error, Result};
use crate::solver::{solve, Criterion, SolverConfig};

/// Grid, replication count, and solver settings for one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    /// Criterion every replication optimizes.
    pub criterion: Criterion,
    /// Condition counts to sweep.
    pub k_values: Vec<usize>,
    /// Parameter counts to sweep; only pairs with p < k run.
    pub p_values: Vec<usize>,
    /// Solves per (k, p) cell.
    pub replications: usize,
    /// Stopping tolerance passed to every solve.
    pub tolerance: f64,
    /// Master seed; per-replication seeds derive from it.
    pub seed: u64,
}

impl BenchSpec {
    /// The default simulation grid: k in {10, 20, 30, 40}, p from 4 to
    /// 30, 50 replications at tolerance 1e-4, seed 42.
    pub fn new(criterion: Criterion) -> Self {
        BenchSpec {
            criterion,
            k_values: vec![10, 20, 30, 40],
            p_values: vec![4, 5, 8, 10, 15, 20, 25, 30],
            replications: 50,
            tolerance: 1e-4,
            seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig { reason: "replications must be at least 1".into() });
        }
        if self.k_values.iter().chain(&self.p_values).any(|v| *v == 0) {
            return Err(Error::InvalidConfig { reason: "grid sizes must be at least 1".into() });
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidConfig { reason: "tolerance must be a positive real".into() });
        }
        Ok(())
    }
}

/// Aggregated results of every replication at one (k, p) size.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    /// Number of conditions.
    pub k: usize,
    /// Number of parameters.
    pub p: usize,
    /// Mean iteration count over the completed replications.
    pub mean_iterations: f64,
    /// Sample standard deviation of the iteration counts.
    pub sd_iterations: f64,
    /// Mean solve time in seconds (problem generation excluded).
    pub mean_elapsed_seconds: f64,
    /// Sample standard deviation of the solve times.
    pub sd_elapsed_seconds: f64,
    /// Replications that failed to converge (or errored outright).
    pub failures: usize,
}

/// Output shapes `emit_table` can render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    /// Machine-readable rows under the fixed header
    /// `k,p,mean_iter,sd_iter,mean_sec,sd_sec,failures`.
    Csv,
    /// Human-readable `mean (sd)` table.
    Markdown,
    /// Pretty-printed array of cell objects with full field names.
    Json,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed of one replication, derived from the master seed and the cell
/// coordinates by chained splitmix64 finalizer steps.
///
/// The derivation is part of the output contract: changing it changes
/// every benchmark number.
pub fn replication_seed(seed: u64, k: usize, p: usize, replication: usize) -> u64 {
    const GOLDEN: u64 = 0x9E3779B97F4A7C15;
    let mut state = seed;
    for word in [k as u64, p as u64, replication as u64] {
        state = mix(state.wrapping_add(GOLDEN).wrapping_add(word));
    }
    state
}

/// Generates the random rank-one problem for one replication: k design
/// points with p coordinates each, i.i.d. uniform on the open interval
/// (-1, 1), from a ChaCha stream seeded with `seed`.
///
/// Requires p < k, which makes the information matrix at the uniform
/// allocation positive definite with probability one; the measure-zero
/// degenerate draw panics rather than returning an error.
pub fn generate_problem(k: usize, p: usize, seed: u64) -> DesignProblem<f64> {
    assert!(p < k, "need more conditions than parameters (got k={k}, p={p})");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<DesignPoint<f64>> = (0..k)
        .map(|_| {
            let coords: Vec<f64> = (0..p)
                .map(|_| {
                    let u: f64 = rng.sample(Open01);
                    2.0 * u - 1.0
                })
                .collect();
            DesignPoint::new(coords).expect("uniform draws are finite")
        })
        .collect();
    from_points(points).expect("random points span the parameter space")
}

fn sample_mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Runs the full grid and returns one cell per (k, p) pair with p < k,
/// in k-major order.
///
/// Replications within a cell run in parallel on the current rayon pool;
/// per-replication seeding keeps every number independent of the
/// scheduling. A replication that fails to converge (or errors) is
/// counted in `failures`; completed solves contribute their iteration
/// counts and times to the means either way.
pub fn run_benchmark(spec: &BenchSpec) -> Result<Vec<BenchCell>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &k in &spec.k_values {
        for &p in &spec.p_values {
            if p >= k {
                continue;
            }
            cells.push(run_cell(spec, k, p));
        }
    }
    Ok(cells)
}

fn run_cell(spec: &BenchSpec, k: usize, p: usize) -> BenchCell {
    let outcomes: Vec<Option<(usize, f64, bool)>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let problem = generate_problem(k, p, replication_seed(spec.seed, k, p, rep));
            let mut config = SolverConfig::new(spec.criterion);
            config.tolerance = spec.tolerance;
            match solve(&problem, &config) {
                Ok(report) => Some((report.iterations, report.elapsed_seconds, report.converged)),
                Err(_) => None,
            }
        })
        .collect();

    let mut iterations = Vec::with_capacity(outcomes.len());
    let mut times = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for outcome in &outcomes {
        match outcome {
            Some((iter, secs, converged)) => {
                iterations.push(*iter as f64);
                times.push(*secs);
                if !converged {
                    failures += 1;
                }
            }
            None => failures += 1,
        }
    }
    let (mean_iterations, sd_iterations) = sample_mean_sd(&iterations);
    let (mean_elapsed_seconds, sd_elapsed_seconds) = sample_mean_sd(&times);
    BenchCell {
        k,
        p,
        mean_iterations,
        sd_iterations,
        mean_elapsed_seconds,
        sd_elapsed_seconds,
        failures,
    }
}

/// Renders cells as text: CSV and JSON losslessly (shortest round-trip
/// float form), markdown rounded for reading.
pub fn emit_table(cells: &[BenchCell], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let mut out = String::from("k,p,mean_iter,sd_iter,mean_sec,sd_sec,failures\n");
            for c in cells {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.k,
                    c.p,
                    c.mean_iterations,
                    c.sd_iterations,
                    c.mean_elapsed_seconds,
                    c.sd_elapsed_seconds,
                    c.failures
                ));
            }
            out
        }
        TableFormat::Markdown => {
            let mut out = String::from(
                "| k | p | iterations (sd) | seconds (sd) | failures |\n|--:|--:|--:|--:|--:|\n",
            );
            for c in cells {
                out.push_str(&format!(
                    "| {} | {} | {:.1} ({:.1}) | {:.3} ({:.3}) | {} |\n",
                    c.k,
                    c.p,
                    c.mean_iterations,
                    c.sd_iterations,
                    c.mean_elapsed_seconds,
                    c.sd_elapsed_seconds,
                    c.failures
                ));
            }
            out
        }
        TableFormat::Json => {
            let mut out =
                serde_json::to_string_pretty(cells).expect("cells serialize infallibly");
            out.push('\n');
            out
        }
    }
}
