use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use conic_split::generators::{generate, small_example, GenSpec};
use conic_split::io::{read_problem, read_solution, solution_to_json, write_problem};
use conic_split::{solve_observed, ConicProgram, SolverError, Status, TraceRecord};
use conic_split_harness::bench::{run_bench, write_rows, BenchSpec};
use conic_split_harness::compare::compare;
use conic_split_harness::config::{reference_rule, SolverConfig};
use conic_split_harness::resolve_threads;
use conic_split_harness::trace::write_trace_file;
use serde_json::json;

const EXIT_MAX_ITERS: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "conic-split",
    version,
    about = "Splitting solver for LP and SOCP with adaptive conditioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file.
    Solve(SolveArgs),
    /// Write a random or bundled instance.
    Generate(GenerateArgs),
    /// Run a benchmark matrix and write a CSV summary.
    Bench(BenchArgs),
    /// Tabulate residuals of two or more solutions of one problem.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "split", value_parser = ["split", "dr", "admm"])]
    algorithm: String,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value = "none", value_parser = ["none", "sinkhorn", "adaptive", "fixed"])]
    precondition: String,
    /// Normalization parameter (default 9.2 for LPs, 1.7 otherwise).
    #[arg(long)]
    t: Option<f64>,
    /// Conditioning schedule: `none`, `once:K`, `START:STRIDE[:END]` or `K1,K2,...`.
    #[arg(long)]
    condition: Option<String>,
    /// Row and column scaling file for `--precondition fixed`.
    #[arg(long)]
    scaling: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    trace_stride: usize,
    /// Solution file with `x` and `y`; stop once both its primal residual and
    /// duality gap are strictly beaten.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    max_seconds: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Store `A` in compressed sparse rows.
    #[arg(long)]
    sparse: bool,
    /// Solution output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = ["lp-normal", "lp-uniform", "socp", "small-example"])]
    family: String,
    /// Number of variables; required for random families.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 4)]
    cone_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// CSV summary; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall-clock times. Without it output is identical across reruns.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(required = true, num_args = 2..)]
    solutions: Vec<PathBuf>,
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    if let Some(n) = resolve_threads(flag)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn load_problem(path: &Path, sparse: bool) -> Result<ConicProgram> {
    let mut program =
        read_problem(path).with_context(|| format!("bad problem file {}", path.display()))?;
    if sparse {
        program.a = program.a.into_sparse();
    }
    Ok(program)
}

fn solve_cmd(args: SolveArgs) -> Result<ExitCode> {
    init_threads(args.threads)?;
    let program = load_problem(&args.problem, args.sparse)?;
    let config = SolverConfig {
        name: None,
        algorithm: args.algorithm,
        precondition: args.precondition,
        mu: args.mu,
        t: args.t,
        condition: args.condition,
        tol: args.tol,
        max_iters: args.max_iters,
        trace_stride: args.trace_stride,
        max_seconds: args.max_seconds,
        scaling: args.scaling,
    };
    let mut settings = config.settings(&program)?;
    if let Some(path) = &args.reference {
        settings.stop = reference_rule(&program, path)?;
    }
    let projector = Arc::new(program.projector()?);
    let stride = settings.options.trace_stride;
    let mut partial: Vec<TraceRecord> = Vec::new();
    let result = solve_observed(&program, projector, &settings, |view| {
        if args.trace.is_some()
            && (view.record.iter % stride == 0 || view.record.conditioning_event)
        {
            partial.push(*view.record);
        }
    });
    let report = match result {
        Ok(r) => r,
        Err(e @ (SolverError::Diverged { .. } | SolverError::NonFinite { .. })) => {
            if let Some(path) = &args.trace {
                write_trace_file(path, &partial, true)?;
            }
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_DIVERGED));
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &args.trace {
        write_trace_file(path, &report.trace, true)?;
    }
    if let Some(path) = &args.out {
        std::fs::write(path, solution_to_json(&report.solution))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let r = report.residuals;
    let summary = json!({
        "status": report.status.to_string(),
        "iterations": report.iterations,
        "primal_res": r.primal_res,
        "dual_res": r.dual_res,
        "gap": r.gap,
        "cone_dist_x": r.cone_dist_x,
        "cone_dist_z": r.cone_dist_z,
        "combined_residual": r.combined(),
        "combined_residual_definition": "max(primal_res, dual_res, gap)",
        "primal_obj": report.solution.primal_obj,
        "dual_obj": report.solution.dual_obj,
        "conditioning_events": report.conditioning_events,
        "wall_ms": report.wall_ms,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(match report.status {
        Status::Converged => ExitCode::SUCCESS,
        Status::MaxIters | Status::TimeLimit => ExitCode::from(EXIT_MAX_ITERS),
    })
}

fn generate_cmd(args: GenerateArgs) -> Result<ExitCode> {
    let program = if args.family == "small-example" {
        small_example().program
    } else {
        let spec = GenSpec {
            family: args.family.parse()?,
            n: args.n.context("--n is required for random families")?,
            m: args.m,
            cone_size: args.cone_size,
            seed: args.seed,
        };
        generate(&spec)?.0
    };
    write_problem(&args.out, &program)?;
    Ok(ExitCode::SUCCESS)
}

fn bench_cmd(args: BenchArgs) -> Result<ExitCode> {
    init_threads(args.threads)?;
    let spec = BenchSpec::from_file(&args.spec)?;
    let rows = run_bench(&spec, args.timing)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            write_rows(file, &rows)?;
        }
        None => write_rows(std::io::stdout().lock(), &rows)?,
    }
    let failed = rows.iter().filter(|r| r.failed.is_some()).count();
    eprintln!("{} runs, {failed} failed", rows.len());
    Ok(ExitCode::SUCCESS)
}

fn compare_cmd(args: CompareArgs) -> Result<ExitCode> {
    let program = load_problem(&args.problem, false)?;
    let projector = program.projector()?;
    let solutions = args
        .solutions
        .iter()
        .map(|p| {
            let s =
                read_solution(p).with_context(|| format!("bad solution file {}", p.display()))?;
            anyhow::ensure!(
                s.x.len() == program.n(),
                "bad solution file {}: length {} does not match n = {}",
                p.display(),
                s.x.len(),
                program.n()
            );
            Ok((p.display().to_string(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    println!("{}", compare(&program, &projector, &solutions));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve_cmd(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
