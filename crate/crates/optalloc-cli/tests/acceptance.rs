//! Acceptance suite: one test per criterion in the project checklist,
//! each printing a single `criterion N (...): PASS/FAIL` line (visible
//! with `--nocapture`, or automatically for failing criteria).
//!
//! The heavy corpora are solved once in shared statics:
//!
//! - main corpus: 200 seeded problems cycling the full benchmark grid
//!   (23 cells with p < k), seeds 4242 + 7919 i;
//! - independence corpus: 200 problems cycling the 16 grid cells with
//!   k <= p(p+1)/2, where rank-one components can be linearly
//!   independent, same seed formula;
//! - small corpus: 20 problems with k <= 3, p <= 2 for the exhaustive
//!   oracle and the CLI round trip, seeds 9000 + 101 i (retry +1000003
//!   when a draw is rejected as non-spanning or ill-conditioned).

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use once_cell::sync::Lazy;
use rayon::prelude::*;
use tempfile::TempDir;

use optalloc::{
    a_objective, d_efficiency, emit_table, from_points, generate_problem, grid_oracle,
    monotonicity_audit, run_benchmark, solve, Allocation, BenchCell, BenchSpec, Criterion,
    DesignPoint, DesignProblem, InformationComponent, SolverConfig, TableFormat,
};

const CORPUS_SIZE: usize = 200;
const SEED_BASE: u64 = 4242;
const SEED_STEP: u64 = 7919;

const K_VALUES: [usize; 4] = [10, 20, 30, 40];
const P_VALUES: [usize; 8] = [4, 5, 8, 10, 15, 20, 25, 30];

/// All grid cells with p < k, k-major: 23 of them.
fn full_grid() -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for k in K_VALUES {
        for p in P_VALUES {
            if p < k {
                cells.push((k, p));
            }
        }
    }
    cells
}

/// Grid cells where k rank-one components can be linearly independent
/// (k <= p(p+1)/2): 16 of them.
fn independent_grid() -> Vec<(usize, usize)> {
    full_grid().into_iter().filter(|(k, p)| *k <= p * (p + 1) / 2).collect()
}

struct ProblemStats {
    k: usize,
    p: usize,
    seed: u64,
    converged: bool,
    kkt_residual: f64,
    audit_violations: usize,
    min_bound_slack: f64,
    max_simplex_err: f64,
    min_weight: f64,
    independent: bool,
}

struct Pass {
    stats: Vec<ProblemStats>,
    elapsed: Duration,
}

fn run_pass(cells: Vec<(usize, usize)>, criterion: Criterion, tolerance: f64) -> Pass {
    let start = Instant::now();
    let stats: Vec<ProblemStats> = (0..CORPUS_SIZE)
        .into_par_iter()
        .map(|i| {
            let (k, p) = cells[i % cells.len()];
            let seed = SEED_BASE + SEED_STEP * i as u64;
            let problem = generate_problem(k, p, seed);
            let mut config = SolverConfig::new(criterion);
            config.tolerance = tolerance;
            config.record_trace = true;
            let report = solve(&problem, &config).expect("corpus problems are well posed");
            let trace = report.trace.as_ref().expect("trace was requested");

            let mut max_simplex_err = 0.0f64;
            let mut min_weight = f64::INFINITY;
            for record in trace {
                let weights = record.weights.weights();
                let sum: f64 = weights.iter().sum();
                max_simplex_err = max_simplex_err.max((sum - 1.0).abs());
                min_weight = min_weight.min(weights.iter().copied().fold(f64::INFINITY, f64::min));
            }
            let (audit_violations, min_bound_slack) = match criterion {
                Criterion::DOptimal => monotonicity_audit(trace, p),
                Criterion::AOptimal => (report.monotone_violations, 0.0),
            };
            ProblemStats {
                k,
                p,
                seed,
                converged: report.converged,
                kkt_residual: report.kkt_residual,
                audit_violations,
                min_bound_slack,
                max_simplex_err,
                min_weight,
                independent: report.independent,
            }
        })
        .collect();
    Pass { stats, elapsed: start.elapsed() }
}

static MAIN_D: Lazy<Pass> = Lazy::new(|| run_pass(full_grid(), Criterion::DOptimal, 1e-4));
static MAIN_A: Lazy<Pass> = Lazy::new(|| run_pass(full_grid(), Criterion::AOptimal, 1e-6));
static INDEP_D: Lazy<Pass> =
    Lazy::new(|| run_pass(independent_grid(), Criterion::DOptimal, 1e-6));

static BENCH_D: Lazy<(Vec<BenchCell>, Duration)> = Lazy::new(|| {
    let start = Instant::now();
    let cells = run_benchmark(&BenchSpec::new(Criterion::DOptimal)).expect("default spec is valid");
    (cells, start.elapsed())
});
static BENCH_A: Lazy<(Vec<BenchCell>, Duration)> = Lazy::new(|| {
    let start = Instant::now();
    let cells = run_benchmark(&BenchSpec::new(Criterion::AOptimal)).expect("default spec is valid");
    (cells, start.elapsed())
});

/// splitmix64 finalizer; drives the small-corpus point generator.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

struct TinyRng(u64);

impl TinyRng {
    fn next_unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        (mix64(self.0) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn next_coord(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}

/// 20 small problems (k <= 3, p <= 2) for the oracle and CLI round trip.
///
/// A draw is rejected (and the seed bumped by 1000003) when the points do
/// not span, or when the uniform-allocation information matrix is poor
/// enough that its inverse trace exceeds 20; near-singular instances make
/// any fixed-resolution lattice comparison meaningless.
fn small_corpus() -> Vec<DesignProblem<f64>> {
    let cells = [(2usize, 1usize), (3, 1), (2, 2), (3, 2)];
    (0..20)
        .map(|i| {
            let (k, p) = cells[i % cells.len()];
            let mut seed = 9000u64 + 101 * i as u64;
            for _ in 0..50 {
                let mut rng = TinyRng(seed);
                let points: Vec<DesignPoint<f64>> = (0..k)
                    .map(|_| {
                        DesignPoint::new((0..p).map(|_| rng.next_coord()).collect())
                            .expect("finite draws")
                    })
                    .collect();
                if let Ok(problem) = from_points(points) {
                    let trace_inv = a_objective(&problem, &Allocation::uniform(k))
                        .expect("construction guarantees a nonsingular sum");
                    if trace_inv <= 20.0 {
                        return problem;
                    }
                }
                seed += 1_000_003;
            }
            panic!("no well-posed draw for cell ({k}, {p}) after 50 attempts");
        })
        .collect()
}

fn find_cell<'a>(cells: &'a [BenchCell], k: usize, p: usize) -> &'a BenchCell {
    cells.iter().find(|c| c.k == k && c.p == p).expect("cell in default grid")
}

/// Adjacent inversions of the decreasing-iterations trend within each k.
fn trend_inversions(cells: &[BenchCell]) -> Vec<(usize, usize)> {
    K_VALUES
        .iter()
        .map(|&k| {
            let row: Vec<&BenchCell> = cells.iter().filter(|c| c.k == k).collect();
            let inversions = row
                .windows(2)
                .filter(|pair| pair[1].mean_iterations > pair[0].mean_iterations)
                .count();
            (k, inversions)
        })
        .collect()
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optalloc"));
    cmd.env_remove("OPTALLOC_THREADS");
    cmd
}

fn write_json(dir: &TempDir, name: &str, value: &serde_json::Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

#[test]
fn criterion_01_d_improvement_bound() {
    let pass = &*MAIN_D;
    let violations: usize = pass.stats.iter().map(|s| s.audit_violations).sum();
    let min_slack =
        pass.stats.iter().map(|s| s.min_bound_slack).fold(f64::INFINITY, f64::min);
    let ok = violations == 0 && pass.elapsed < Duration::from_secs(120);
    println!(
        "criterion 1 (d improvement bound): {} ({} violations over {} problems, min slack {:.3e}, {:.1?})",
        if ok { "PASS" } else { "FAIL" },
        violations,
        pass.stats.len(),
        min_slack,
        pass.elapsed
    );
    assert_eq!(violations, 0, "improvement bound violated; min slack {min_slack:.3e}");
    assert!(pass.elapsed < Duration::from_secs(120), "d pass took {:?}", pass.elapsed);
}

#[test]
fn criterion_02_simplex_preservation() {
    let worst_err = MAIN_D
        .stats
        .iter()
        .chain(&MAIN_A.stats)
        .map(|s| s.max_simplex_err)
        .fold(0.0f64, f64::max);
    let worst_weight = MAIN_D
        .stats
        .iter()
        .chain(&MAIN_A.stats)
        .map(|s| s.min_weight)
        .fold(f64::INFINITY, f64::min);
    let ok = worst_err < 1e-10 && worst_weight >= 0.0;
    println!(
        "criterion 2 (simplex preservation): {} (max |sum-1| {:.3e}, min weight {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        worst_err,
        worst_weight
    );
    assert!(worst_err < 1e-10, "worst simplex error {worst_err:.3e}");
    assert!(worst_weight >= 0.0, "negative weight {worst_weight:.3e}");
}

#[test]
fn criterion_03_kkt_certification_d() {
    let pass = &*INDEP_D;
    let considered: Vec<&ProblemStats> =
        pass.stats.iter().filter(|s| s.independent && s.converged).collect();
    let over: Vec<&&ProblemStats> =
        considered.iter().filter(|s| s.kkt_residual >= 1e-4).collect();
    let max_residual =
        considered.iter().map(|s| s.kkt_residual).fold(0.0f64, f64::max);
    let ok = over.is_empty() && considered.len() == pass.stats.len();
    println!(
        "criterion 3 (kkt certification, d): {} ({}/{} residuals >= 1e-4, max {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        over.len(),
        considered.len(),
        max_residual
    );
    if let Some(worst) = over.first() {
        println!(
            "  e.g. k={} p={} seed={} residual {:.3e}",
            worst.k, worst.p, worst.seed, worst.kkt_residual
        );
    }
    assert_eq!(
        considered.len(),
        pass.stats.len(),
        "every problem should be independent and converge"
    );
    assert!(
        over.is_empty(),
        "{}/{} converged solves have residual >= 1e-4 (max {max_residual:.3e}); \
         the stopping rule bounds weight movement, not sensitivity ratios, so \
         slowly-decaying small weights stop while still classified active",
        over.len(),
        considered.len()
    );
}

#[test]
fn criterion_04_kkt_certification_a() {
    let pass = &*MAIN_A;
    let unconverged = pass.stats.iter().filter(|s| !s.converged).count();
    let over: Vec<&ProblemStats> =
        pass.stats.iter().filter(|s| s.converged && s.kkt_residual >= 1e-3).collect();
    let max_residual = pass.stats.iter().map(|s| s.kkt_residual).fold(0.0f64, f64::max);
    let ok = unconverged == 0 && over.is_empty();
    println!(
        "criterion 4 (kkt certification, a): {} ({} unconverged, {}/{} residuals >= 1e-3, max {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        unconverged,
        over.len(),
        pass.stats.len(),
        max_residual
    );
    assert_eq!(unconverged, 0, "a-criterion solves should all converge");
    assert!(
        over.is_empty(),
        "{}/{} converged solves have residual >= 1e-3 (max {max_residual:.3e}); \
         same structural cause as the d-side certification gap",
        over.len(),
        pass.stats.len()
    );
}

#[test]
fn criterion_05_oracle_equivalence() {
    let corpus = small_corpus();
    let mut worst_gap = 0.0f64;
    let mut worst_eff = f64::INFINITY;
    for problem in &corpus {
        for criterion in [Criterion::DOptimal, Criterion::AOptimal] {
            let mut config = SolverConfig::new(criterion);
            config.tolerance = 1e-8;
            let report = solve(problem, &config).expect("small problems are well posed");
            assert!(report.converged);
            let (oracle_alloc, oracle_obj) =
                grid_oracle(problem, criterion, 0.001).expect("small instances fit the oracle");
            let gap = (report.objective - oracle_obj).abs();
            worst_gap = worst_gap.max(gap);
            if criterion == Criterion::DOptimal {
                let eff = d_efficiency(problem, &report.weights, &oracle_alloc)
                    .expect("both allocations nonsingular");
                worst_eff = worst_eff.min(eff);
            }
        }
    }
    let ok = worst_gap < 1e-3 && worst_eff >= 0.999;
    println!(
        "criterion 5 (oracle equivalence): {} (worst objective gap {:.3e}, worst d-efficiency {:.6})",
        if ok { "PASS" } else { "FAIL" },
        worst_gap,
        worst_eff
    );
    assert!(worst_gap < 1e-3, "objective gap {worst_gap:.3e}");
    assert!(worst_eff >= 0.999, "d-efficiency {worst_eff:.6}");
}

#[test]
fn criterion_06_closed_form_optimum() {
    let problem = from_points(vec![
        DesignPoint::new(vec![1.0, -1.0]).unwrap(),
        DesignPoint::new(vec![1.0, 0.0]).unwrap(),
        DesignPoint::new(vec![1.0, 1.0]).unwrap(),
    ])
    .unwrap();
    let mut worst = 0.0f64;
    for criterion in [Criterion::DOptimal, Criterion::AOptimal] {
        let report = solve(&problem, &SolverConfig::new(criterion)).unwrap();
        assert!(report.converged);
        let w = report.weights.weights();
        for (got, want) in w.iter().zip(&[0.5f64, 0.0, 0.5]) {
            worst = worst.max((got - want).abs());
        }
    }
    let ok = worst < 1e-3;
    println!(
        "criterion 6 (closed-form optimum): {} (max deviation {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        worst
    );
    assert!(worst < 1e-3, "deviation {worst:.3e} from (0.5, 0, 0.5)");
}

#[test]
fn criterion_07_d_iteration_bands() {
    let (cells, elapsed) = &*BENCH_D;
    let small = find_cell(cells, 10, 4);
    let large = find_cell(cells, 40, 30);
    let inversions = trend_inversions(cells);
    let trend_ok = inversions.iter().all(|(_, n)| *n <= 1);
    let ok = (34.0..=80.0).contains(&small.mean_iterations)
        && (8.0..=14.0).contains(&large.mean_iterations)
        && trend_ok
        && *elapsed < Duration::from_secs(300);
    println!(
        "criterion 7 (d iteration bands): {} (k10p4 {:.1} in [34,80], k40p30 {:.1} in [8,14], inversions {:?}, {:.1?})",
        if ok { "PASS" } else { "FAIL" },
        small.mean_iterations,
        large.mean_iterations,
        inversions,
        elapsed
    );
    println!("{}", emit_table(cells, TableFormat::Markdown));
    assert!(
        (34.0..=80.0).contains(&small.mean_iterations),
        "k=10 p=4 mean {:.2}",
        small.mean_iterations
    );
    assert!(
        (8.0..=14.0).contains(&large.mean_iterations),
        "k=40 p=30 mean {:.2}",
        large.mean_iterations
    );
    assert!(trend_ok, "iteration trend inversions per k: {inversions:?}");
    assert!(*elapsed < Duration::from_secs(300), "benchmark took {elapsed:?}");
}

#[test]
fn criterion_08_a_iteration_bands() {
    let (cells, elapsed) = &*BENCH_A;
    let small = find_cell(cells, 10, 4);
    let large = find_cell(cells, 40, 30);
    let ok = (70.0..=190.0).contains(&small.mean_iterations)
        && (55.0..=80.0).contains(&large.mean_iterations);
    println!(
        "criterion 8 (a iteration bands): {} (k10p4 {:.1} in [70,190], k40p30 {:.1} in [55,80], {:.1?})",
        if ok { "PASS" } else { "FAIL" },
        small.mean_iterations,
        large.mean_iterations,
        elapsed
    );
    // Elapsed-time columns are reported, never asserted.
    println!("{}", emit_table(cells, TableFormat::Markdown));
    assert!(
        (70.0..=190.0).contains(&small.mean_iterations),
        "k=10 p=4 mean {:.2}",
        small.mean_iterations
    );
    assert!(
        (55.0..=80.0).contains(&large.mean_iterations),
        "k=40 p=30 mean {:.2}; the damped update needs fewer steps here than \
         the band allows",
        large.mean_iterations
    );
}

#[test]
fn criterion_09_a_monotonicity_audit() {
    let pass = &*MAIN_A;
    let increases: usize = pass.stats.iter().map(|s| s.audit_violations).sum();
    if increases == 0 {
        println!(
            "criterion 9 (a monotonicity audit): PASS (0 objective increases over {} problems)",
            pass.stats.len()
        );
    } else {
        // Report-only: a nonzero count is evidence against the conjecture
        // that the damped update always decreases the objective, not a
        // build failure.
        println!(
            "criterion 9 (a monotonicity audit): FLAG ({increases} objective increases observed)"
        );
    }
}

#[test]
fn criterion_10_scale_invariance() {
    let cells = full_grid();
    let mut worst = 0.0f64;
    for i in 0..10usize {
        let (k, p) = cells[i % cells.len()];
        let seed = SEED_BASE + SEED_STEP * i as u64;
        let generated = generate_problem(k, p, seed);
        let scaled_by = |c: f64| -> DesignProblem<f64> {
            let components = generated
                .components()
                .iter()
                .map(|comp| {
                    let m = comp.matrix();
                    let rows: Vec<Vec<f64>> =
                        (0..p).map(|r| (0..p).map(|s| c * m[(r, s)]).collect()).collect();
                    InformationComponent::from_rows(&rows).unwrap()
                })
                .collect();
            DesignProblem::new(p, components, None).unwrap()
        };
        let base = scaled_by(1.0);
        for criterion in [Criterion::DOptimal, Criterion::AOptimal] {
            let reference = solve(&base, &SolverConfig::new(criterion)).unwrap();
            for c in [1e-3, 1e3] {
                let report = solve(&scaled_by(c), &SolverConfig::new(criterion)).unwrap();
                for (a, b) in
                    report.weights.weights().iter().zip(reference.weights.weights())
                {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let ok = worst < 1e-9;
    println!(
        "criterion 10 (scale invariance): {} (max weight deviation {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        worst
    );
    assert!(worst < 1e-9, "allocations drift {worst:.3e} under component rescaling");
}

#[test]
fn criterion_11_cli_round_trip_and_determinism() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus();
    let mut round_trips = 0;
    for (i, problem) in corpus.iter().enumerate() {
        let points: Vec<Vec<f64>> = problem
            .points()
            .expect("small corpus is point-built")
            .iter()
            .map(|pt| pt.coordinates().to_vec())
            .collect();
        let problem_path = write_json(
            &dir,
            &format!("problem{i}.json"),
            &serde_json::json!({"p": problem.p(), "points": points}),
        );
        for criterion in ["d", "a"] {
            let report_path = dir.path().join(format!("report{i}{criterion}.json"));
            let solve_out = bin()
                .arg("solve")
                .arg(&problem_path)
                .args(["--criterion", criterion, "--tol", "1e-7"])
                .arg("--output")
                .arg(&report_path)
                .output()
                .unwrap();
            assert_eq!(
                solve_out.status.code(),
                Some(0),
                "solve failed on problem {i} ({criterion}): {}",
                String::from_utf8_lossy(&solve_out.stderr)
            );
            let report: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
            let weights_path =
                write_json(&dir, &format!("weights{i}{criterion}.json"), &report["weights"]);
            let verify_out = bin()
                .arg("verify")
                .arg(&problem_path)
                .arg(&weights_path)
                .args(["--criterion", criterion])
                .output()
                .unwrap();
            assert_eq!(
                verify_out.status.code(),
                Some(0),
                "round trip failed on problem {i} ({criterion}): {}",
                String::from_utf8_lossy(&verify_out.stdout)
            );
            round_trips += 1;
        }
    }

    let bench_args = ["bench", "--k", "10,20", "--p", "4,5,8", "--reps", "10", "--seed", "42"];
    let first = bin().args(bench_args).output().unwrap();
    let second = bin().args(bench_args).output().unwrap();
    assert_eq!(first.status.code(), Some(0));
    let identical_runs = first.stdout == second.stdout;

    let one = bin().args(bench_args).env("OPTALLOC_THREADS", "1").output().unwrap();
    let two = bin().args(bench_args).env("OPTALLOC_THREADS", "2").output().unwrap();
    let identical_threads = one.stdout == two.stdout && one.stdout == first.stdout;

    let ok = identical_runs && identical_threads;
    println!(
        "criterion 11 (cli round trip and determinism): {} ({} round trips exited 0, bench bytes identical: runs {}, threads {})",
        if ok { "PASS" } else { "FAIL" },
        round_trips,
        identical_runs,
        identical_threads
    );
    assert!(identical_runs, "bench output differs between identical runs");
    assert!(identical_threads, "bench output depends on thread count");
}
