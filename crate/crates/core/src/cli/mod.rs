//! Command-line front end.
//!
//! Exit codes: 0 success, 1 negative outcome (validation failed, condition
//! violated, no convergence, nontrivial kernel), 2 usage error, 3 problem file
//! could not be loaded, 4 runtime failure.

mod problem_file;
mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cases::{manufactured, remark1_problem, remark2_problem, CaseBundle};
use crate::characteristics::{trace, TraceOptions};
use crate::dissipativity::constants;
use crate::operators::{Discretization, PeriodicGridFunction};
use crate::solver::{kernel_probe, solve_direct, solve_picard, Method, SolveError, SolveResult};

pub use problem_file::{load, parse, render, LoadError, NumericsConfig, ProblemFile};
pub use report::to_json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_LOAD: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

pub const THREADS_ENV: &str = "CHARPERIODIC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "charperiodic", version, about = "Time-periodic solutions of 1D hyperbolic systems with reflection boundary conditions")]
struct Cli {
    /// Worker threads (default: CHARPERIODIC_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing assumptions on sample points.
    Validate { problem: PathBuf },
    /// Compute the dissipativity constants S0, T0, S1, T1.
    Check {
        problem: PathBuf,
        #[arg(long)]
        grid_x: Option<usize>,
        #[arg(long)]
        grid_t: Option<usize>,
    },
    /// Print one characteristic as CSV columns xi,tau.
    Trace {
        problem: PathBuf,
        /// Component, 1-based.
        #[arg(long)]
        j: usize,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Solve the problem on the grid of its numerics section.
    Solve {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        nt: Option<usize>,
        /// Write the solution grid here (CSV, or binary for a .bin path).
        #[arg(long)]
        grid_out: Option<PathBuf>,
        #[arg(long, value_enum)]
        grid_format: Option<GridFormat>,
    },
    /// Singular values of the discretized I - C - D.
    Kernel {
        problem: PathBuf,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        nt: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Write a built-in problem file.
    Case {
        #[command(subcommand)]
        case: CaseCommand,
    },
}

#[derive(Debug, Subcommand)]
enum CaseCommand {
    /// Two lossless waves of speed +-alpha.
    Remark1 {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
    },
    /// Coupled waves with an infinite-dimensional kernel.
    Remark2,
    /// Right-hand side for the [exact] section of a problem file.
    Manufactured {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Picard, falling back to the direct solver when it fails.
    Auto,
    Picard,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridFormat {
    Csv,
    Bin,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Load(#[from] LoadError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Load(_) => EXIT_LOAD,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = thread_count(cli.threads).and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(runtime)?;
        pool.install(|| dispatch(&cli))
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("charperiodic: {e}");
            e.code()
        }
    }
}

/// 0 lets the pool pick.
fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a thread count, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(runtime)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate { problem } => {
            let file = load(problem)?;
            let report = file.spec.validate(file.numerics.validate_samples_x, file.numerics.validate_samples_t);
            emit(out, &to_json(&report))?;
            Ok(if report.passed { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Check { problem, grid_x, grid_t } => {
            let file = load(problem)?;
            let gx = grid_x.unwrap_or(file.numerics.check_grid_x);
            let gt = grid_t.unwrap_or(file.numerics.check_grid_t);
            let report = constants(&file.spec, gx, gt, file.numerics.ode_steps).map_err(runtime)?;
            emit(out, &to_json(&report))?;
            Ok(if report.cond_t8 { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Trace { problem, j, x, t, steps } => {
            let file = load(problem)?;
            let n = file.spec.n();
            if *j < 1 || *j > n {
                return Err(CliError::Usage(format!("--j must lie in 1..={n}")));
            }
            if !(0.0..=1.0).contains(x) || !t.is_finite() {
                return Err(CliError::Usage("--x must lie in [0, 1] and --t must be finite".into()));
            }
            let opts = TraceOptions::without_stretch(steps.unwrap_or(file.numerics.ode_steps));
            let tr = trace(&file.spec, j - 1, *x, *t, opts).map_err(runtime)?;
            let mut csv = String::from("xi,tau\n");
            for (xi, tau) in tr.xi_nodes().iter().zip(tr.tau_values()) {
                csv.push_str(&format!("{xi:.16e},{tau:.16e}\n"));
            }
            emit(out, &csv)?;
            Ok(EXIT_OK)
        }
        Command::Solve { problem, method, nx, nt, grid_out, grid_format } => {
            let file = load(problem)?;
            solve_command(&file, *method, *nx, *nt, grid_out.as_deref(), *grid_format, out)
        }
        Command::Kernel { problem, nx, nt, threshold } => {
            let file = load(problem)?;
            let num = &file.numerics;
            let (nx, nt) = grid_size(num, *nx, *nt)?;
            let threshold = threshold.unwrap_or(num.kernel_threshold);
            let disc = Discretization::new(&file.spec, nx, nt, num.ode_steps).map_err(runtime)?;
            let probe = kernel_probe(&disc, threshold, num.assembly_cap).map_err(runtime)?;
            let report = KernelReport {
                nx,
                nt,
                unknowns: disc.unknowns(),
                threshold,
                estimated_dim: probe.estimated_dim,
                smallest_relative: probe.smallest_relative(),
                singular_values: &probe.singular_values,
            };
            emit(out, &to_json(&report))?;
            Ok(if probe.estimated_dim == 0 { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Case { case } => {
            let (bundle, numerics) = match case {
                CaseCommand::Remark1 { alpha } => (remark1_problem(*alpha).map_err(|e| CliError::Usage(e.to_string()))?, None),
                CaseCommand::Remark2 => (remark2_problem(), None),
                CaseCommand::Manufactured { file } => {
                    let skeleton = load(file)?;
                    let exact = skeleton.exact.clone().ok_or_else(|| {
                        CliError::Load(LoadError::Numerics(format!("{} has no [exact] section", file.display())))
                    })?;
                    (manufactured(&skeleton.spec, exact).map_err(runtime)?, Some(skeleton.numerics))
                }
            };
            let CaseBundle { spec, exact, notes } = bundle;
            let numerics = numerics.unwrap_or_default();
            emit(out, &render(&ProblemFile { spec, numerics, exact, notes: Some(notes) }))?;
            Ok(EXIT_OK)
        }
    }
}

fn grid_size(num: &NumericsConfig, nx: Option<usize>, nt: Option<usize>) -> Result<(usize, usize), CliError> {
    let (nx, nt) = (nx.unwrap_or(num.nx), nt.unwrap_or(num.nt));
    if nx < 1 || nt < crate::operators::MIN_NT {
        return Err(CliError::Usage(format!("grid needs nx >= 1 and nt >= {}", crate::operators::MIN_NT)));
    }
    Ok((nx, nt))
}

#[derive(Serialize)]
struct KernelReport<'a> {
    nx: usize,
    nt: usize,
    unknowns: usize,
    threshold: f64,
    estimated_dim: usize,
    smallest_relative: f64,
    singular_values: &'a [f64],
}

#[derive(Serialize)]
struct SolveReport {
    method: Option<Method>,
    converged: bool,
    residual_sup: f64,
    outer_iters: usize,
    inner_iters_total: usize,
    contraction_estimates: Vec<f64>,
    nx: usize,
    nt: usize,
    ode_steps: usize,
    tol: f64,
    unknowns: usize,
    /// Discrete S0 and T0 on the solve grid.
    grid_s0: f64,
    grid_t0: f64,
    /// Sup-norm distance to the `[exact]` section, when present.
    exact_error: Option<f64>,
    grid_out: Option<String>,
    warnings: Vec<String>,
}

fn solve_command(
    file: &ProblemFile,
    method: MethodArg,
    nx: Option<usize>,
    nt: Option<usize>,
    grid_out: Option<&Path>,
    grid_format: Option<GridFormat>,
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let num = &file.numerics;
    let (nx, nt) = grid_size(num, nx, nt)?;
    let cfg = num.solver();
    let disc = Discretization::new(&file.spec, nx, nt, num.ode_steps).map_err(runtime)?;
    let (s0, t0) = disc.boundary_gains();
    let mut warnings = Vec::new();
    if s0 * t0 >= 1.0 {
        warnings.push(format!("S0*T0 = {:.6} >= 1 on the grid: the boundary iteration need not converge", s0 * t0));
    }

    let direct = |warnings: &mut Vec<String>| -> Result<Option<SolveResult>, CliError> {
        match solve_direct(&disc, disc.forcing(), &cfg) {
            Ok(res) => Ok(Some(res)),
            Err(e @ (SolveError::Singular { .. } | SolveError::CapExceeded { .. })) => {
                warnings.push(e.to_string());
                Ok(None)
            }
            Err(e) => Err(runtime(e)),
        }
    };
    let result = match method {
        MethodArg::Picard => Some(solve_picard(&disc, disc.forcing(), &cfg)),
        MethodArg::Direct => direct(&mut warnings)?,
        MethodArg::Auto => {
            let picard = solve_picard(&disc, disc.forcing(), &cfg);
            if picard.converged {
                Some(picard)
            } else {
                warnings.push(format!(
                    "Picard iteration stopped after {} outer iterations with residual {:.3e}; trying the direct solver",
                    picard.outer_iters, picard.residual_sup
                ));
                direct(&mut warnings)?.or(Some(picard))
            }
        }
    };

    let exact_error = match (&result, &file.exact) {
        (Some(res), Some(exact)) => {
            let sampled = PeriodicGridFunction::try_from_fn(file.spec.n(), nx, nt, |j, x, t| exact[j].evaluate(x, t))
                .map_err(runtime)?;
            Some(res.u.distance(&sampled))
        }
        _ => None,
    };
    if let (Some(res), Some(path)) = (&result, grid_out) {
        write_grid(&res.u, path, grid_format)?;
    }
    let report = match &result {
        Some(res) => SolveReport {
            method: Some(res.method),
            converged: res.converged,
            residual_sup: res.residual_sup,
            outer_iters: res.outer_iters,
            inner_iters_total: res.inner_iters_total,
            contraction_estimates: res.contraction_estimates.clone(),
            nx,
            nt,
            ode_steps: num.ode_steps,
            tol: cfg.tol,
            unknowns: disc.unknowns(),
            grid_s0: s0,
            grid_t0: t0,
            exact_error,
            grid_out: grid_out.map(|p| p.display().to_string()),
            warnings,
        },
        None => SolveReport {
            method: None,
            converged: false,
            residual_sup: f64::NAN,
            outer_iters: 0,
            inner_iters_total: 0,
            contraction_estimates: Vec::new(),
            nx,
            nt,
            ode_steps: num.ode_steps,
            tol: cfg.tol,
            unknowns: disc.unknowns(),
            grid_s0: s0,
            grid_t0: t0,
            exact_error: None,
            grid_out: None,
            warnings,
        },
    };
    emit(out, &to_json(&report))?;
    Ok(if report.converged { EXIT_OK } else { EXIT_NEGATIVE })
}

fn write_grid(u: &PeriodicGridFunction, path: &Path, format: Option<GridFormat>) -> Result<(), CliError> {
    let format = format.unwrap_or(if path.extension().is_some_and(|e| e == "bin") { GridFormat::Bin } else { GridFormat::Csv });
    let fail = |e: io::Error| runtime(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(fail)?);
    match format {
        GridFormat::Csv => u.write_csv(&mut w),
        GridFormat::Bin => u.write_binary(&mut w),
    }
    .and_then(|_| w.flush())
    .map_err(fail)
}
