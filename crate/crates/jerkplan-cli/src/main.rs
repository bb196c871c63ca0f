//! Command-line front end: instance generation, solving, validation, and
//! benchmarking.
//!
//! Exit codes: 0 on success (a solve that certifies or correctly reports a
//! degenerate instance, a check that passes), 1 when a solve stops on a
//! budget or an uncertified stall or a check fails, 2 on usage and input
//! errors.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use jerkplan::descent::Direction;
use jerkplan::instance::{self, Instance, InstanceError};
use jerkplan::linearize::Mode;
use jerkplan::objective;
use jerkplan::sca::{self, ScaError, SolveConfig, SolveReport, StopReason};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] ScaError),
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

#[derive(Parser)]
#[command(
    name = "jerkplan",
    version,
    about = "Minimum-time speed profiles under speed, acceleration, and jerk limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write it as JSON.
    Gen(GenArgs),
    /// Solve an instance file; emit a profile CSV and a report JSON.
    Solve(SolveArgs),
    /// Validate a profile CSV against an instance.
    Check(CheckArgs),
    /// Time repeated solves over seeded instances.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Random seven-plateau cap profile.
    Exp1,
    /// Random piecewise-linear curvature path.
    Exp2,
    /// Sine-shaped path.
    Sine,
    /// Straight-clothoid-circle path.
    Clothoid,
}

#[derive(Args)]
struct GenArgs {
    /// Instance family.
    #[arg(value_enum)]
    kind: Kind,
    /// Grid points.
    #[arg(long)]
    n: usize,
    /// Seed for the random families; sine and clothoid ignore it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Tangent slopes; full steps stay feasible.
    ThetaBeta,
    /// Secant slope; sharper model behind a line search.
    Eta,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    /// Most-violated-point heuristic direction.
    Heuristic,
    /// Simplex direction on the multiplier model.
    Lp,
}

#[derive(Args)]
struct SolverFlags {
    /// Jerk-row linearization.
    #[arg(long, value_enum, default_value_t = ModeArg::ThetaBeta)]
    mode: ModeArg,
    /// Trust-region direction engine.
    #[arg(long, value_enum, default_value_t = DirectionArg::Heuristic)]
    dir: DirectionArg,
    /// Inner alternation gap bound.
    #[arg(long)]
    eps: Option<f64>,
    /// Trust-region radius floor.
    #[arg(long)]
    eps1: Option<f64>,
    /// Outer iteration budget.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Step stall tolerance, relative to the largest cap.
    #[arg(long)]
    step_tol_rel: Option<f64>,
    /// KKT residual target for certification.
    #[arg(long)]
    kkt_target: Option<f64>,
}

impl SolverFlags {
    fn config(&self) -> SolveConfig {
        let mut cfg = SolveConfig {
            mode: match self.mode {
                ModeArg::ThetaBeta => Mode::ThetaBeta,
                ModeArg::Eta => Mode::Eta,
            },
            direction: match self.dir {
                DirectionArg::Heuristic => Direction::Heuristic,
                DirectionArg::Lp => Direction::Lp,
            },
            ..SolveConfig::default()
        };
        if let Some(eps) = self.eps {
            cfg.eps = eps;
        }
        if let Some(eps1) = self.eps1 {
            cfg.eps1 = eps1;
        }
        if let Some(max_outer) = self.max_outer {
            cfg.max_outer = max_outer;
        }
        if let Some(step_tol_rel) = self.step_tol_rel {
            cfg.step_tol_rel = step_tol_rel;
        }
        if let Some(kkt_target) = self.kkt_target {
            cfg.kkt_target = kkt_target;
        }
        cfg
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    /// Profile CSV path; stdout when absent.
    #[arg(long)]
    profile_out: Option<PathBuf>,
    /// Report JSON path; omitted when absent.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Instance JSON file.
    instance: PathBuf,
    /// Profile CSV file as emitted by solve.
    profile: PathBuf,
    /// Feasibility tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// Seeded seven-plateau instances.
    Exp1,
    /// Seeded curvature-path instances.
    Exp2,
    /// The sine path (deterministic; repeats time the same instance).
    Exp3,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance family.
    #[arg(value_enum)]
    suite: Suite,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Instances per size (seeds 0..repeats).
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[command(flatten)]
    flags: SolverFlags,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Check(args) => cmd_check(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn generate(kind: Kind, seed: u64, n: usize) -> Result<Instance, InstanceError> {
    match kind {
        Kind::Exp1 => instance::gen_experiment1(seed, n),
        Kind::Exp2 => instance::gen_experiment2(seed, n),
        Kind::Sine => instance::gen_sine_path(n),
        Kind::Clothoid => instance::gen_clothoid_path(n),
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CliError> {
    let inst = generate(args.kind, args.seed, args.n)?;
    let text = inst.to_json();
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// Profile CSV: grid position, squared speed, speed, and the finite
/// difference forms of acceleration and jerk the constraints bound.
fn profile_csv(inst: &Instance, w: &[f64]) -> String {
    let n = inst.n;
    let h = inst.h;
    let mut out = String::from("s,w,v,a,jerk\n");
    for i in 0..n {
        let s = h * i as f64;
        let v = w[i].max(0.0).sqrt();
        let a = if i + 1 < n {
            (w[i + 1] - w[i]) / (2.0 * h)
        } else {
            (w[i] - w[i - 1]) / (2.0 * h)
        };
        let jerk = if i > 0 && i + 1 < n {
            (w[i - 1] - 2.0 * w[i] + w[i + 1]) * ((w[i - 1] + w[i + 1]) / 2.0).sqrt()
                / (2.0 * h * h)
        } else {
            0.0
        };
        writeln!(out, "{s:.16e},{:.16e},{v:.16e},{a:.16e},{jerk:.16e}", w[i])
            .expect("writing to a string cannot fail");
    }
    out
}

fn reason_label(reason: StopReason) -> &'static str {
    match reason {
        StopReason::KktCertified => "kkt_certified",
        StopReason::SmallStep => "small_step",
        StopReason::IterationBudget => "iteration_budget",
        StopReason::Degenerate => "degenerate",
    }
}

fn report_json(report: &SolveReport) -> String {
    let value = serde_json::json!({
        "version": 1,
        "travel_time": report.travel_time,
        "kkt_residual": report.kkt_residual,
        "iterations": report.iterations,
        "backtracks": report.backtracks,
        "growth_restrictions": report.growth_restrictions,
        "reason": reason_label(report.reason),
        "solve_seconds": report.solve_seconds,
        "objective_trail": report.objective,
    });
    serde_json::to_string_pretty(&value).expect("report serialization cannot fail")
}

fn solve_exit(reason: StopReason) -> ExitCode {
    match reason {
        StopReason::KktCertified | StopReason::Degenerate => ExitCode::SUCCESS,
        StopReason::SmallStep | StopReason::IterationBudget => ExitCode::from(1),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, CliError> {
    let inst = Instance::from_json(&read_file(&args.instance)?)?;
    let report = sca::solve(&inst, &args.flags.config())?;
    let csv = profile_csv(&inst, &report.profile);
    match &args.profile_out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.report_out {
        write_file(path, &report_json(&report))?;
    }
    eprintln!(
        "travel time {:.9} s, kkt {:.3e}, {} iterations, {} ({:.3} s)",
        report.travel_time,
        report.kkt_residual,
        report.iterations,
        reason_label(report.reason),
        report.solve_seconds,
    );
    Ok(solve_exit(report.reason))
}

/// Parses the `w` column back out of a profile CSV.
fn parse_profile(text: &str) -> Result<Vec<f64>, CliError> {
    let mut w = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.starts_with('s') {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Usage(format!(
                "profile line {} has {} fields, expected 5",
                lineno + 1,
                fields.len()
            )));
        }
        let value: f64 = fields[1].trim().parse().map_err(|_| {
            CliError::Usage(format!("profile line {}: bad w value {:?}", lineno + 1, fields[1]))
        })?;
        w.push(value);
    }
    if w.is_empty() {
        return Err(CliError::Usage("profile file has no data rows".into()));
    }
    Ok(w)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, CliError> {
    let inst = Instance::from_json(&read_file(&args.instance)?)?;
    let w = parse_profile(&read_file(&args.profile)?)?;
    if w.len() != inst.n {
        return Err(CliError::Usage(format!(
            "profile has {} rows, instance has {} grid points",
            w.len(),
            inst.n
        )));
    }
    let report = objective::check_feasibility(&w, &inst, args.tol);
    println!(
        "bounds {:.3e}, acc {:.3e}, jerk+ {:.3e}, jerk- {:.3e} (tol {:.1e})",
        report.bounds.max, report.acc.max, report.jerk_par.max, report.jerk_nar.max, args.tol,
    );
    if report.feasible {
        println!("feasible");
        Ok(ExitCode::SUCCESS)
    } else {
        let (family, index, violation) = report.worst();
        println!("infeasible: {family} row {index} violated by {violation:.3e}");
        Ok(ExitCode::from(1))
    }
}

struct BenchRun {
    seed: u64,
    travel_time: f64,
    kkt_residual: f64,
    reason: StopReason,
    seconds: f64,
}

fn bench_threads(tasks: usize) -> usize {
    let requested = std::env::var("JERKPLAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k >= 1);
    let available = std::thread::available_parallelism().map(|k| k.get()).unwrap_or(1);
    requested.unwrap_or(available).min(tasks.max(1))
}

/// Solves seeds `0..repeats` at one size, workers striped over seeds,
/// results merged back in seed order.
fn bench_size(
    suite: Suite,
    n: usize,
    repeats: usize,
    cfg: &SolveConfig,
) -> Result<Vec<BenchRun>, CliError> {
    let instances: Vec<(u64, Instance)> = (0..repeats as u64)
        .map(|seed| {
            let inst = match suite {
                Suite::Exp1 => instance::gen_experiment1(seed, n),
                Suite::Exp2 => instance::gen_experiment2(seed, n),
                Suite::Exp3 => instance::gen_sine_path(n),
            };
            inst.map(|inst| (seed, inst))
        })
        .collect::<Result<_, _>>()?;

    let workers = bench_threads(instances.len());
    let mut stripes: Vec<Vec<(usize, BenchRun)>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|worker| {
                let instances = &instances;
                scope.spawn(move || {
                    let mut runs = Vec::new();
                    for (idx, (seed, inst)) in instances.iter().enumerate() {
                        if idx % workers != worker {
                            continue;
                        }
                        let started = Instant::now();
                        let report = sca::solve(inst, cfg)?;
                        runs.push((
                            idx,
                            BenchRun {
                                seed: *seed,
                                travel_time: report.travel_time,
                                kkt_residual: report.kkt_residual,
                                reason: report.reason,
                                seconds: started.elapsed().as_secs_f64(),
                            },
                        ));
                    }
                    Ok::<_, ScaError>(runs)
                })
            })
            .collect();
        for handle in handles {
            let runs = handle.join().expect("bench worker cannot panic")?;
            stripes.push(runs);
        }
        Ok::<_, ScaError>(())
    })?;

    let mut merged: Vec<(usize, BenchRun)> = stripes.into_iter().flatten().collect();
    merged.sort_by_key(|(idx, _)| *idx);
    Ok(merged.into_iter().map(|(_, run)| run).collect())
}

fn stats(values: impl Iterator<Item = f64> + Clone) -> serde_json::Value {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
        count += 1;
    }
    serde_json::json!({ "min": min, "max": max, "mean": sum / count as f64 })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    if args.sizes.is_empty() {
        return Err(CliError::Usage("at least one size is required".into()));
    }
    if args.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let cfg = args.flags.config();
    let suite_label = match args.suite {
        Suite::Exp1 => "exp1",
        Suite::Exp2 => "exp2",
        Suite::Exp3 => "exp3",
    };
    let mut entries = Vec::new();
    for &n in &args.sizes {
        let runs = bench_size(args.suite, n, args.repeats, &cfg)?;
        let certified =
            runs.iter().filter(|r| r.reason == StopReason::KktCertified).count();
        entries.push(serde_json::json!({
            "n": n,
            "seconds": stats(runs.iter().map(|r| r.seconds)),
            "travel_time": stats(runs.iter().map(|r| r.travel_time)),
            "certified": certified,
            "runs": runs.iter().map(|r| serde_json::json!({
                "seed": r.seed,
                "travel_time": r.travel_time,
                "kkt_residual": r.kkt_residual,
                "reason": reason_label(r.reason),
            })).collect::<Vec<_>>(),
        }));
    }
    let table = serde_json::json!({
        "version": 1,
        "suite": suite_label,
        "repeats": args.repeats,
        "entries": entries,
    });
    let text = serde_json::to_string_pretty(&table).expect("table serialization cannot fail");
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
