//! `segsolve`: batch front end for the segregation solver.
//!
//! Exit codes: 0 ok, 1 I/O, 2 problem definition, 3 numerical,
//! 4 validation failure.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use segsolve::benchmarks::{self, error_table, ErrorTable, DESK_NS, FULL_NS, TABLE_RULES};
use segsolve::dynamics::{default_s_samples, validate, ValidationReport};
use segsolve::oracle::{oracle_agrees, random_instance, Agreement, OracleComparison};
use segsolve::problem::ProblemConfig;
use segsolve::solver::{solve, SolveConfig, Sweep};
use segsolve::twophase::{monotonicity_probe, refinement_study, ProbeReport};
use segsolve::{Dynamics, Error, Field, Grid, Problem, TwoPhase};

#[derive(Parser)]
#[command(name = "segsolve", version, about = "Stationary states of segregating reaction-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a registered or configured problem and write its fields.
    Solve(SolveArgs),
    /// Error table against the exact solution, rows M = k·N.
    Table(TableArgs),
    /// Oracle sweep, monotonicity probes and dynamics checks.
    Validate(ValidateArgs),
    /// Monotonicity probe of the two-phase operator.
    Probe(ProbeArgs),
    /// Refinement study on nested grids.
    Refine(RefineArgs),
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum SweepArg {
    #[default]
    Jacobi,
    /// In-place lexicographic order; outside the invariant guarantees.
    GaussSeidel,
}

impl From<SweepArg> for Sweep {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::Jacobi => Sweep::Jacobi,
            SweepArg::GaussSeidel => Sweep::GaussSeidel,
        }
    }
}

#[derive(Args)]
struct Source {
    /// Registered problem: example1, example2, example3.
    #[arg(long, conflicts_with = "config")]
    problem: Option<String>,
    /// JSON problem file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid intervals per side.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    /// Iteration budget M (default 4·N²).
    #[arg(long)]
    iters: Option<usize>,
    /// Early exit once the scheme residual is at most this (0 disables).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    audit_every: usize,
    #[arg(long)]
    record_energy: bool,
    #[arg(long, value_enum, default_value_t)]
    sweep: SweepArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated N values (default 10,20,40).
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Comma-separated k of the rules M = k·N (default 5,10,20,40,80,160).
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<usize>>,
    /// All columns up to N = 320.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value_t)]
    sweep: SweepArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 20240101)]
    seed: u64,
    /// Probe trials per problem.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Random oracle instances.
    #[arg(long, default_value_t = 12)]
    instances: usize,
    /// Add a probe with deliberately decreasing dynamics.
    #[arg(long)]
    inject_nonmonotone: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 20240101)]
    seed: u64,
    /// Replace the first reaction with f(x, s) = -s.
    #[arg(long)]
    inject_nonmonotone: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated nested N values (default 10,20,40).
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Budget per grid is this times N² (default 4).
    #[arg(long, default_value_t = 4)]
    iters_per_n2: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Command failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 1,
            Error::Numerical { .. } | Error::InternalConsistency { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn validation_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 4,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn load(source: &Source, default: &str) -> Result<Problem, Failure> {
    let mut problem = match &source.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Problem::from_config(&ProblemConfig::from_json(&text)?)?
        }
        None => benchmarks::by_name(source.problem.as_deref().unwrap_or(default))?,
    };
    if let Some(n) = source.n {
        problem = problem.with_n(n);
    }
    problem.validate()?;
    Ok(problem)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn write_csv(dir: &Path, name: &str, field: &Field) -> CmdResult {
    let file = fs::File::create(dir.join(name))?;
    field.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let problem = load(&args.source, "example2")?;
    let n = problem.n;
    let config = SolveConfig {
        max_iterations: args.iters.unwrap_or(4 * n * n),
        residual_tol: args.tol,
        audit_every: args.audit_every,
        record_energy: args.record_energy,
        sweep: args.sweep.into(),
        ..SolveConfig::default()
    };
    fs::create_dir_all(&args.out)?;
    let started = Instant::now();
    let (state, report) = solve(&problem, &config)?;
    for (l, w) in state.phases().iter().enumerate() {
        write_csv(&args.out, &format!("u_{}.csv", l + 1), w)?;
    }
    write_csv(&args.out, "w.csv", &state.sum_field())?;
    if let Some(exact) = problem.exact_fields(state.grid()) {
        for (l, e) in exact.iter().enumerate() {
            write_csv(&args.out, &format!("exact_{}.csv", l + 1), e)?;
        }
        let r = benchmarks::sum_error(&state, &exact);
        write_json(&args.out, "error.json", &json!({ "n": n, "m": report.iterations, "r": r }))?;
    }
    if let Ok(config) = problem.to_config() {
        fs::write(args.out.join("problem.json"), config.to_json() + "\n")?;
    }
    fs::write(args.out.join("report.json"), report.to_json(200) + "\n")?;
    write_json(
        &args.out,
        "meta.json",
        &json!({
            "solve_seconds": report.wall_time.as_secs_f64(),
            "total_seconds": started.elapsed().as_secs_f64(),
        }),
    )?;
    println!(
        "{}: N={} iterations={} residual={:.3e}",
        problem.name, n, report.iterations, report.final_residual
    );
    Ok(())
}

fn cmd_table(args: &TableArgs) -> CmdResult {
    let problem = load(&args.source, "example2")?;
    if problem.exact.is_none() {
        return Err(Error::Validation(format!("{} has no exact solution", problem.name)).into());
    }
    let ns = match (&args.n_list, args.full) {
        (Some(ns), _) => ns.clone(),
        (None, true) => FULL_NS.to_vec(),
        (None, false) => DESK_NS.to_vec(),
    };
    let rules = args.rules.clone().unwrap_or_else(|| TABLE_RULES.to_vec());
    let table: ErrorTable = error_table(&problem, &ns, &rules, args.sweep.into())?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("table.txt"), table.to_text())?;
    fs::write(args.out.join("table.json"), table.to_json() + "\n")?;
    print!("{}", table.to_text());
    Ok(())
}

fn nonmonotone() -> Dynamics {
    Dynamics::custom(
        "decreasing(-s)",
        |_, s: f64| -s,
        |_, s: f64| -s * s / 2.0,
        false,
        true,
    )
}

#[derive(Serialize)]
struct ProbeEntry {
    name: String,
    report: ProbeReport,
}

#[derive(Serialize)]
struct ValidateFindings {
    seed: u64,
    oracle: Vec<OracleComparison>,
    probes: Vec<ProbeEntry>,
    dynamics: Vec<ValidationReport>,
    passed: bool,
}

fn probe_problems(inject: bool) -> Result<Vec<(String, TwoPhase)>, Failure> {
    let c = |v: f64| Dynamics::constant(v).map_err(Failure::from);
    let a = |v: f64| Dynamics::weighted_abs(v).map_err(Failure::from);
    let mut out = vec![
        ("constant(2)".to_string(), TwoPhase::from_fn(2, 20, |x| x[0], c(2.0)?, c(2.0)?)?),
        ("weighted_abs(10)".to_string(), TwoPhase::from_fn(2, 20, |x| x[0], a(10.0)?, a(10.0)?)?),
        (
            "example1".to_string(),
            TwoPhase::from_spec(&benchmarks::example1::<f64>())?,
        ),
    ];
    if inject {
        out.push((
            "injected_nonmonotone".to_string(),
            TwoPhase::from_fn(2, 20, |x| x[0], nonmonotone(), c(1.0)?)?,
        ));
    }
    Ok(out)
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut oracle = Vec::new();
    for i in 0..args.instances {
        let problem: Problem = random_instance(&mut rng, i);
        oracle.push(oracle_agrees(&problem, 1e-7, 1e-9)?);
    }
    let probes: Vec<ProbeEntry> = probe_problems(args.inject_nonmonotone)?
        .into_iter()
        .map(|(name, p)| ProbeEntry {
            name,
            report: monotonicity_probe(&p, args.trials, args.seed),
        })
        .collect();
    let grid = Grid::new(2, 19)?;
    let mut dynamics = Vec::new();
    for name in benchmarks::REGISTRY {
        for d in benchmarks::by_name::<f64>(name)?.dynamics {
            if !dynamics.iter().any(|r: &ValidationReport| r.dynamics == d.label()) {
                dynamics.push(validate(&d, &grid, &default_s_samples()));
            }
        }
    }
    let oracle_ok = oracle
        .iter()
        .all(|c| c.status == Agreement::Agree && c.first_order_violations == 0 && c.oracle_audit_clean);
    let probes_ok = probes.iter().all(|p| p.report.is_clean());
    let dynamics_ok = dynamics.iter().all(ValidationReport::is_clean);
    let passed = oracle_ok && probes_ok && dynamics_ok;
    fs::create_dir_all(&args.out)?;
    write_json(
        &args.out,
        "validate.json",
        &ValidateFindings {
            seed: args.seed,
            oracle,
            probes,
            dynamics,
            passed,
        },
    )?;
    println!("oracle: {oracle_ok}  probes: {probes_ok}  dynamics: {dynamics_ok}");
    if passed {
        Ok(())
    } else {
        Err(validation_failure("validation suite failed, see validate.json"))
    }
}

fn cmd_probe(args: &ProbeArgs) -> CmdResult {
    let problem = load(&args.source, "example1")?;
    let mut p = TwoPhase::from_spec(&problem)?;
    if args.inject_nonmonotone {
        p.f1 = nonmonotone();
    }
    let report = monotonicity_probe(&p, args.trials, args.seed);
    fs::create_dir_all(&args.out)?;
    write_json(&args.out, "probe.json", &report)?;
    println!("{} trials, {} violations", report.trials, report.violations.len());
    if let Some(w) = report.violations.first() {
        return Err(validation_failure(format!(
            "operator decreases at node {:?} ({:?}): {} -> {}",
            w.node, w.variable, w.before, w.after
        )));
    }
    Ok(())
}

fn cmd_refine(args: &RefineArgs) -> CmdResult {
    let problem = load(&args.source, "example2")?;
    let ns = args.n_list.clone().unwrap_or_else(|| DESK_NS.to_vec());
    let k = args.iters_per_n2;
    let table = refinement_study(&problem, &ns, |n| SolveConfig::with_iterations(k * n * n))?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("refine.txt"), table.to_text())?;
    write_json(&args.out, "refine.json", &table)?;
    print!("{}", table.to_text());
    Ok(())
}

fn configure_threads() {
    let threads = std::env::var("SEGSOLVE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // only fails if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Table(a) => cmd_table(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Refine(a) => cmd_refine(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
