//! Command-line front end: solve, verify, bench, and apportion over
//! problem files.
//!
//! Exit codes are part of the contract:
//!
//! - 0: success (and, for verify, certification passed)
//! - 1: input or usage error (details on standard error as
//!   `error[CODE]: message`)
//! - 2: solve completed but did not converge within the iteration cap
//!   (the report is still written)
//! - 3: verify ran but the allocation failed certification
//!
//! Reports carry no wall-clock times unless `--timestamps` is given, so
//! output bytes are identical across runs for fixed inputs and seeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use optalloc::{
    apportion, emit_table, from_points, kkt_residual_a, kkt_residual_d, run_benchmark, solve,
    Allocation, BenchSpec, Criterion, DesignPoint, DesignProblem, ProblemJson, SolverConfig,
    TableFormat,
};

/// Residual below which `verify` certifies an allocation (exit 0).
const VERIFY_RESIDUAL_BAR: f64 = 1e-3;

/// Weight files may miss an exact sum of 1 by at most this much; smaller
/// discrepancies are renormalized away with a warning.
const WEIGHT_SUM_BAND: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "optalloc",
    version,
    about = "Optimal allocation weights for regression experiments (D- and A-criteria)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an optimal allocation for a problem file.
    Solve(SolveArgs),
    /// Check the optimality conditions of a given allocation.
    Verify(VerifyArgs),
    /// Run the seeded random benchmark grid and print a table.
    Bench(BenchArgs),
    /// Round an allocation to integer unit counts.
    Apportion(ApportionArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    /// Maximize the log-determinant of the information matrix.
    D,
    /// Minimize the trace of the inverse information matrix.
    A,
}

impl From<CriterionArg> for Criterion {
    fn from(arg: CriterionArg) -> Criterion {
        match arg {
            CriterionArg::D => Criterion::DOptimal,
            CriterionArg::A => Criterion::AOptimal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Problem JSON: {"p", "points" or "components", optional "labels"}.
    Json,
    /// One design point per line, comma-separated coordinates, no header.
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormatArg {
    Csv,
    Markdown,
    Json,
}

impl From<TableFormatArg> for TableFormat {
    fn from(arg: TableFormatArg) -> TableFormat {
        match arg {
            TableFormatArg::Csv => TableFormat::Csv,
            TableFormatArg::Markdown => TableFormat::Markdown,
            TableFormatArg::Json => TableFormat::Json,
        }
    }
}

#[derive(Parser)]
struct SolveArgs {
    /// Problem description file.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = CriterionArg::D)]
    criterion: CriterionArg,
    /// Stopping tolerance on the largest single-weight change per step.
    #[arg(long = "tol", default_value_t = 1e-4)]
    tolerance: f64,
    /// Iteration cap; exceeding it exits 2 with converged=false.
    #[arg(long = "max-iter", default_value_t = 100_000)]
    max_iterations: usize,
    /// Record the per-iteration trace in the report.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value_t = InputFormat::Json)]
    input_format: InputFormat,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep real wall-clock times in the report (output bytes then vary
    /// from run to run).
    #[arg(long)]
    timestamps: bool,
}

#[derive(Parser)]
struct VerifyArgs {
    /// Problem description file.
    input: PathBuf,
    /// JSON array of candidate weights.
    weights: PathBuf,
    #[arg(long, value_enum, default_value_t = CriterionArg::D)]
    criterion: CriterionArg,
    /// Weights at or below this threshold count as off the support.
    /// Lower it when tiny support weights are intentional.
    #[arg(long = "support-tol", default_value_t = 1e-3)]
    support_tolerance: f64,
    #[arg(long, value_enum, default_value_t = InputFormat::Json)]
    input_format: InputFormat,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Parser)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = CriterionArg::D)]
    criterion: CriterionArg,
    /// Condition counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40")]
    k: Vec<usize>,
    /// Parameter counts to sweep; only pairs with p < k run.
    #[arg(long, value_delimiter = ',', default_value = "4,5,8,10,15,20,25,30")]
    p: Vec<usize>,
    /// Replications per grid cell.
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Stopping tolerance for every solve.
    #[arg(long = "tol", default_value_t = 1e-4)]
    tolerance: f64,
    /// Master seed; each replication derives its own from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = TableFormatArg::Csv)]
    format: TableFormatArg,
    /// Write the table here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep real solve times in the table (columns are zeroed otherwise
    /// so output bytes stay reproducible).
    #[arg(long)]
    timestamps: bool,
}

#[derive(Parser)]
struct ApportionArgs {
    /// JSON array of weights.
    weights: PathBuf,
    /// Total number of units to distribute (at least 1).
    #[arg(long)]
    units: u64,
}

/// An input failure: machine-parsable code plus a human message. Always
/// exits 1.
struct CliError {
    code: &'static str,
    message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::new("IO", format!("{}: {err}", path.display()))
    }

    fn from_lib(err: optalloc::Error) -> Self {
        let code = match &err {
            optalloc::Error::DimensionMismatch { .. } => "INPUT_DIM",
            optalloc::Error::NonFinite
            | optalloc::Error::Asymmetric { .. }
            | optalloc::Error::NotNonnegativeDefinite { .. }
            | optalloc::Error::InvalidConfig { .. } => "INPUT_VALUE",
            optalloc::Error::SingularComponentSum { .. }
            | optalloc::Error::SingularInformation => "INPUT_SINGULAR",
            optalloc::Error::SchemaViolation { .. } => "INPUT_SCHEMA",
            optalloc::Error::InvalidAllocation { .. } => "INPUT_SIMPLEX",
            optalloc::Error::ProblemTooLarge { .. } => "INPUT_GRID",
        };
        CliError::new(code, err.to_string())
    }

    fn from_json(path: &Path, err: serde_json::Error) -> Self {
        let code = match err.classify() {
            serde_json::error::Category::Io => "IO",
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof => "INPUT_JSON",
            serde_json::error::Category::Data => "INPUT_SCHEMA",
        };
        CliError::new(code, format!("{}: {err}", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not failures; everything else
            // is a usage error and lands on the input-error exit code.
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let exit = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error[{}]: {}", err.code, err.message);
            1
        }
    };
    ExitCode::from(exit)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Apportion(args) => cmd_apportion(args),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8, CliError> {
    let problem = read_problem(&args.input, args.input_format)?;
    let mut config = SolverConfig::new(args.criterion.into());
    config.tolerance = args.tolerance;
    config.max_iterations = args.max_iterations;
    config.record_trace = args.trace;
    let mut report = solve(&problem, &config).map_err(CliError::from_lib)?;
    if !args.timestamps {
        report.elapsed_seconds = 0.0;
    }
    let mut text =
        serde_json::to_string_pretty(&report).expect("report serializes infallibly");
    text.push('\n');
    emit(args.output.as_deref(), &text)?;
    if report.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: stopped after {} iterations without meeting tolerance {}",
            report.iterations, args.tolerance
        );
        Ok(2)
    }
}

#[derive(Serialize)]
struct VerifyCondition {
    sensitivity: f64,
    weight: f64,
    active: bool,
}

#[derive(Serialize)]
struct VerifyOutput {
    criterion: &'static str,
    residual: f64,
    per_condition: Vec<VerifyCondition>,
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, CliError> {
    let problem = read_problem(&args.input, args.input_format)?;
    let weights = read_weights(&args.weights)?;
    if weights.len() != problem.k() {
        return Err(CliError::new(
            "INPUT_DIM",
            format!("problem has {} conditions, weights file has {}", problem.k(), weights.len()),
        ));
    }
    let criterion: Criterion = args.criterion.into();
    let report = match criterion {
        Criterion::DOptimal => kkt_residual_d(&problem, &weights, args.support_tolerance),
        Criterion::AOptimal => kkt_residual_a(&problem, &weights, args.support_tolerance),
    }
    .map_err(CliError::from_lib)?;

    let out = VerifyOutput {
        criterion: criterion.short_name(),
        residual: report.residual,
        per_condition: report
            .per_condition
            .iter()
            .zip(weights.weights())
            .map(|(cond, w)| VerifyCondition {
                sensitivity: cond.sensitivity,
                weight: *w,
                active: cond.active,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("output serializes infallibly");
    text.push('\n');
    emit(args.output.as_deref(), &text)?;
    if report.residual < VERIFY_RESIDUAL_BAR {
        Ok(0)
    } else {
        Ok(3)
    }
}

fn cmd_bench(args: BenchArgs) -> Result<u8, CliError> {
    let spec = BenchSpec {
        criterion: args.criterion.into(),
        k_values: args.k,
        p_values: args.p,
        replications: args.reps,
        tolerance: args.tolerance,
        seed: args.seed,
    };
    let mut cells = match bench_pool()? {
        Some(pool) => pool.install(|| run_benchmark(&spec)),
        None => run_benchmark(&spec),
    }
    .map_err(CliError::from_lib)?;
    if cells.is_empty() {
        return Err(CliError::new(
            "INPUT_GRID",
            "no (k, p) pair has more conditions than parameters",
        ));
    }
    if !args.timestamps {
        for cell in &mut cells {
            cell.mean_elapsed_seconds = 0.0;
            cell.sd_elapsed_seconds = 0.0;
        }
    }
    let text = emit_table(&cells, args.format.into());
    emit(args.output.as_deref(), &text)?;
    Ok(0)
}

fn cmd_apportion(args: ApportionArgs) -> Result<u8, CliError> {
    if args.units == 0 {
        return Err(CliError::new("INPUT_VALUE", "--units must be at least 1"));
    }
    let weights = read_weights(&args.weights)?;
    let counts = apportion(&weights, args.units);
    let mut text = serde_json::to_string(&counts).expect("counts serialize infallibly");
    text.push('\n');
    emit(None, &text)?;
    Ok(0)
}

/// Number of worker threads the bench pool may use, from the
/// OPTALLOC_THREADS environment variable; None means the default pool.
fn bench_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let raw = match std::env::var("OPTALLOC_THREADS") {
        Ok(raw) => raw,
        Err(std::env::VarError::NotPresent) => return Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            return Err(CliError::new("INPUT_VALUE", "OPTALLOC_THREADS is not valid unicode"));
        }
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| {
            CliError::new(
                "INPUT_VALUE",
                format!("OPTALLOC_THREADS must be a positive integer, got {raw:?}"),
            )
        })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|err| CliError::new("INPUT_VALUE", format!("cannot build thread pool: {err}")))?;
    Ok(Some(pool))
}

fn read_problem(path: &Path, format: InputFormat) -> Result<DesignProblem<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|err| CliError::io(path, err))?;
    match format {
        InputFormat::Json => {
            let dto: ProblemJson =
                serde_json::from_str(&text).map_err(|err| CliError::from_json(path, err))?;
            dto.into_problem().map_err(CliError::from_lib)
        }
        InputFormat::Csv => parse_csv_points(path, &text),
    }
}

/// Parses a headerless CSV of design points, one point per line.
fn parse_csv_points(path: &Path, text: &str) -> Result<DesignProblem<f64>, CliError> {
    let mut points: Vec<DesignPoint<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let coords = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| {
                    CliError::new(
                        "INPUT_VALUE",
                        format!("{} line {}: {field:?} is not a number", path.display(), lineno + 1),
                    )
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        match width {
            None => width = Some(coords.len()),
            Some(w) if w != coords.len() => {
                return Err(CliError::new(
                    "INPUT_DIM",
                    format!(
                        "{} line {}: {} coordinates where earlier lines had {w}",
                        path.display(),
                        lineno + 1,
                        coords.len()
                    ),
                ));
            }
            Some(_) => {}
        }
        points.push(DesignPoint::new(coords).map_err(CliError::from_lib)?);
    }
    if points.is_empty() {
        return Err(CliError::new(
            "INPUT_SCHEMA",
            format!("{}: no design points found", path.display()),
        ));
    }
    from_points(points).map_err(CliError::from_lib)
}

/// Reads a JSON array of weights and puts it on the simplex, tolerating
/// (and warning about) sums within the renormalization band.
fn read_weights(path: &Path) -> Result<Allocation<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|err| CliError::io(path, err))?;
    let raw: Vec<f64> =
        serde_json::from_str(&text).map_err(|err| CliError::from_json(path, err))?;
    if raw.is_empty() {
        return Err(CliError::new("INPUT_SIMPLEX", "weights array is empty"));
    }
    if raw.iter().any(|w| !w.is_finite()) {
        return Err(CliError::new("INPUT_SIMPLEX", "weights must be finite"));
    }
    if let Some(bad) = raw.iter().find(|w| **w < 0.0) {
        return Err(CliError::new("INPUT_SIMPLEX", format!("negative weight {bad}")));
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_BAND {
        return Err(CliError::new(
            "INPUT_SIMPLEX",
            format!("weights sum to {sum}, further than {WEIGHT_SUM_BAND} from 1"),
        ));
    }
    let weights = if (sum - 1.0).abs() > 1e-10 {
        eprintln!("warning: weights sum to {sum}; renormalizing");
        raw.into_iter().map(|w| w / sum).collect()
    } else {
        raw
    };
    Allocation::new(weights).map_err(CliError::from_lib)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|err| CliError::io(path, err)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
