//! Command-line benchmark harness: `slevel run` executes a TOML-configured
//! problem over a seed list and writes per-seed metric traces plus a summary;
//! `slevel verify` runs the built-in verification suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use slevel::error::Result;
use slevel::io::{load_run_config, solve_configured, write_metrics_csv_file, RunConfig};
use slevel::levelset::{LevelTrace, StopReason};
use slevel::problem::{Reference, SoecProblem};
use slevel::verify::{run_criterion, VerifyLevel};

#[derive(Parser)]
#[command(
    name = "slevel",
    version,
    about = "Stochastic feasible level-set benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem over a seed list and write metric traces.
    Run(RunArgs),
    /// Run the built-in verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Replace the config's seed list (repeatable).
    #[arg(long = "seed", value_name = "N")]
    seeds: Vec<u64>,
    /// Concurrent seed jobs (default: one per seed).
    #[arg(long, value_name = "K")]
    jobs: Option<usize>,
    /// Output directory (default: the config's `output`, else the working directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dotted-path config override, e.g. `--set solver.theta=1.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite depth: quick is deterministic desk scale, full adds the sweeps.
    #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
    level: LevelArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

/// Exit code for configuration problems (bad config file, bad flags, bad
/// environment); nothing has been written when it is returned.
const EXIT_CONFIG: u8 = 2;
/// Exit code for solver or I/O failures after validation passed.
const EXIT_RUNTIME: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(message) => {
            eprintln!("slevel: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = threads {
        // The global pool serves the verify suite's internal parallelism.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("slevel: thread pool: {e}");
        }
    }
    match cli.command {
        Command::Run(args) => run_command(args, threads),
        Command::Verify(args) => verify_command(args),
    }
}

/// Parse SLEVEL_THREADS: absent means "no cap".
fn thread_cap() -> std::result::Result<Option<usize>, String> {
    match std::env::var("SLEVEL_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!(
                "SLEVEL_THREADS must be a positive integer, got '{raw}'"
            )),
            Ok(n) => Ok(Some(n)),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("SLEVEL_THREADS: {e}")),
    }
}

fn verify_command(args: VerifyArgs) -> ExitCode {
    let level = match args.level {
        LevelArg::Quick => VerifyLevel::Quick,
        LevelArg::Full => VerifyLevel::Full,
    };
    let mut failed = Vec::new();
    for &id in level.criteria() {
        let outcome = run_criterion(id);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(outcome.id.to_string());
        }
    }
    if failed.is_empty() {
        println!("verify: all {} criteria passed", level.criteria().len());
        ExitCode::SUCCESS
    } else {
        eprintln!("verify: failed criteria: {}", failed.join(", "));
        ExitCode::from(EXIT_RUNTIME)
    }
}

/// Everything the summary records about one completed seed.
#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    csv: String,
    stop: &'static str,
    outer_iters: usize,
    grad_iters: u64,
    data_passes: f64,
    r: f64,
    u_hat: f64,
    objective: f64,
    max_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_gap: Option<f64>,
    wall_ms: f64,
    /// True when every outer iterate satisfied all constraints (measured
    /// metrics ≤ 0).
    feasible_path: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct FailureReport {
    seed: u64,
    error: String,
}

#[derive(Serialize)]
struct RunSummary {
    config: String,
    seeds: Vec<SeedReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failures: Vec<FailureReport>,
    /// Fraction of requested seeds whose whole trace stayed feasible; failed
    /// seeds count against it.
    feasible_path_frequency: f64,
}

fn run_command(args: RunArgs, threads: Option<usize>) -> ExitCode {
    // Validate everything before touching the filesystem: any error here
    // exits with the configuration code and writes nothing.
    let mut config = match load_run_config(&args.config, &args.set) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("slevel: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if !args.seeds.is_empty() {
        config.seeds = args.seeds.clone();
        if let Err(e) = config.validate() {
            eprintln!("slevel: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if args.jobs == Some(0) {
        eprintln!("slevel: --jobs must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let (problem, reference) = match prepare(&config) {
        Ok(parts) => parts,
        Err(e) => {
            eprintln!("slevel: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("slevel: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(EXIT_RUNTIME);
    }

    let jobs = args
        .jobs
        .unwrap_or(config.seeds.len())
        .min(threads.unwrap_or(usize::MAX))
        .clamp(1, config.seeds.len().max(1));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("slevel: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    // Each seed writes its own trace file the moment it completes, so an
    // interrupted sweep keeps every finished seed.
    let results: Vec<(u64, Result<(String, LevelTrace)>)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(&problem, &config, seed, reference.as_ref(), &out_dir)))
            .collect()
    });

    let requested = results.len();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok((csv, trace)) => reports.push(seed_report(seed, csv, &trace)),
            Err(e) => failures.push(FailureReport { seed, error: e.to_string() }),
        }
    }
    let feasible = reports.iter().filter(|r| r.feasible_path).count();
    let summary = RunSummary {
        config: args.config.display().to_string(),
        seeds: reports,
        failures,
        feasible_path_frequency: feasible as f64 / requested.max(1) as f64,
    };

    for report in &summary.seeds {
        println!(
            "seed {}: {} after {} outers, objective {}, max violation {} -> {}",
            report.seed,
            report.stop,
            report.outer_iters,
            report.objective,
            report.max_violation,
            report.csv
        );
        for warning in &report.warnings {
            eprintln!("seed {}: warning: {warning}", report.seed);
        }
    }
    for failure in &summary.failures {
        eprintln!("seed {}: error: {}", failure.seed, failure.error);
    }

    let summary_path = out_dir.join("summary.json");
    let payload = match serde_json::to_string_pretty(&summary) {
        Ok(text) => text + "\n",
        Err(e) => {
            eprintln!("slevel: summary serialization: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Err(e) = std::fs::write(&summary_path, payload) {
        eprintln!("slevel: cannot write {}: {e}", summary_path.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    println!(
        "summary: {}/{requested} seeds completed, feasible-path frequency {:.2} -> {}",
        summary.seeds.len(),
        summary.feasible_path_frequency,
        summary_path.display()
    );

    if summary.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

/// Build the problem and optional optimality reference from the validated
/// config. Kept before any filesystem writes so failures stay "nothing
/// happened" configuration errors.
fn prepare(config: &RunConfig) -> Result<(SoecProblem, Option<Reference>)> {
    let problem = config.problem.build()?;
    let reference = config.optimality_reference()?;
    Ok((problem, reference))
}

fn run_seed(
    problem: &SoecProblem,
    config: &RunConfig,
    seed: u64,
    reference: Option<&Reference>,
    out_dir: &Path,
) -> Result<(String, LevelTrace)> {
    let trace = solve_configured(problem, &config.solver, seed, reference)?;
    let name = format!("seed_{seed}.csv");
    write_metrics_csv_file(&trace, out_dir.join(&name))?;
    Ok((name, trace))
}

fn seed_report(seed: u64, csv: String, trace: &LevelTrace) -> SeedReport {
    let last = trace.final_entry();
    SeedReport {
        seed,
        csv,
        stop: match trace.stop {
            StopReason::Converged => "converged",
            StopReason::OuterLimit => "outer-limit",
        },
        outer_iters: trace.entries.len(),
        grad_iters: last.grad_iters,
        data_passes: last.data_passes,
        r: last.r,
        u_hat: last.u_hat,
        objective: last.metrics.objective,
        max_violation: last.metrics.max_violation,
        relative_gap: last.metrics.relative_gap,
        wall_ms: last.wall_ms,
        feasible_path: trace.entries.iter().all(|e| e.metrics.max_violation <= 0.0),
        warnings: trace.warnings.clone(),
    }
}
