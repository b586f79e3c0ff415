//! gabpfix: Gaussian belief propagation solvers with diagonal-loading
//! convergence fixes, plus the CDMA detection experiment harness.
//!
//! Exit codes: 0 when the run converged, 2 when it reported divergence or
//! an exhausted iteration budget, 1 on usage or IO errors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

use gabpfix_core::{
    read_rect_matrix, read_sym_matrix, read_vector, run_gabp, GabpSettings, GabpStatus, IoError,
    LoadingSpec, OuterSettings, SolveStatus, SolverError,
};

use gabpfix_cli::args::{self, CdmaCommand, Cli, Command, FixedMode, GammaMode, Mode, SolverFlags};
use gabpfix_cli::cdma::{gen_cdma, CdmaConfig, CdmaError};
use gabpfix_cli::experiments::{
    experiment_divergence, experiment_fixed, experiment_sweep, log_spaced_grid, ExperimentError,
    FixMode, SweepConfig, SweepRow,
};
use gabpfix_cli::report::{
    csv_floats, detect_signs, print_report, write_csv, write_report, RunReport,
};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Cdma(#[from] CdmaError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let started = Instant::now();
    match cli.command {
        Command::Solve(args) => cmd_solve(args, started),
        Command::Lsq(args) => cmd_lsq(args, started),
        Command::Cdma(CdmaCommand::Diverge(args)) => cmd_cdma_diverge(args, started),
        Command::Cdma(CdmaCommand::Fixed(args)) => cmd_cdma_fixed(args, started),
        Command::Cdma(CdmaCommand::Sweep(args)) => cmd_cdma_sweep(args, started),
    }
}

/// Builds the loading specification from the shared solver flags.
fn build_loading(flags: &SolverFlags) -> Result<LoadingSpec, CliError> {
    match flags.gamma_mode {
        GammaMode::Uniform => {
            let gamma = flags.gamma.ok_or_else(|| {
                CliError::Usage("--gamma is required with --gamma-mode uniform".into())
            })?;
            Ok(LoadingSpec::uniform(gamma))
        }
        GammaMode::Dd => Ok(match flags.margin {
            Some(m) => LoadingSpec::diag_dominant_with_margin(m),
            None => LoadingSpec::diag_dominant(),
        }),
        GammaMode::Custom => {
            let path = flags.gamma_file.as_ref().ok_or_else(|| {
                CliError::Usage("--gamma-file is required with --gamma-mode custom".into())
            })?;
            Ok(LoadingSpec::custom(read_vector(path)?))
        }
    }
}

fn build_outer(flags: &SolverFlags) -> OuterSettings {
    OuterSettings {
        outer_tol: flags.outer_tol,
        max_outer: flags.max_outer,
        inner: GabpSettings {
            max_iterations: flags.max_inner,
            message_tol: flags
                .inner_tol
                .unwrap_or((flags.outer_tol / 10.0).min(1e-6)),
            ..GabpSettings::default()
        },
        step_size: flags.step_size,
    }
}

/// Echo of the shared solver flags for the report.
fn solver_config_json(flags: &SolverFlags) -> serde_json::Value {
    let settings = build_outer(flags);
    serde_json::json!({
        "gamma_mode": match flags.gamma_mode {
            GammaMode::Uniform => "uniform",
            GammaMode::Dd => "dd",
            GammaMode::Custom => "custom",
        },
        "gamma": flags.gamma,
        "gamma_file": flags.gamma_file.as_ref().map(|p| p.display().to_string()),
        "margin": flags.margin,
        "step_size": flags.step_size,
        "inner_tol": settings.inner.message_tol,
        "outer_tol": flags.outer_tol,
        "max_inner": flags.max_inner,
        "max_outer": flags.max_outer,
    })
}

fn finish(
    mut report: RunReport,
    out: Option<&Path>,
    started: Instant,
    converged: bool,
) -> Result<i32, CliError> {
    report.wall_ms = started.elapsed().as_millis() as u64;
    eprintln!(
        "{}: {} ({} outer, {} sweeps)",
        report.mode, report.status, report.outer_iterations, report.total_inner_sweeps
    );
    match out {
        Some(path) => write_report(path, &report).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })?,
        None => print_report(&report),
    }
    Ok(if converged { 0 } else { 2 })
}

fn write_trace<I>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = String>,
{
    write_csv(path, header, rows).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Trace rows for the loaded solvers: one line per outer step.
fn outer_trace_rows(report: &gabpfix_core::FixedSolveReport) -> Vec<String> {
    report
        .inner_iterations_per_step
        .iter()
        .zip(&report.outer_residual_history)
        .enumerate()
        .map(|(t, (inner, res))| format!("{},{inner},{res}", t + 1))
        .collect()
}

fn cmd_solve(args: args::SolveArgs, started: Instant) -> Result<i32, CliError> {
    let j = read_sym_matrix(&args.matrix)?;
    let h = read_vector(&args.rhs)?;
    if h.len() != j.n() {
        return Err(CliError::Usage(format!(
            "rhs has {} entries but the matrix is {}x{}",
            h.len(),
            j.n(),
            j.n()
        )));
    }
    let flags = &args.solver;
    let config = serde_json::json!({
        "matrix": args.matrix.display().to_string(),
        "rhs": args.rhs.display().to_string(),
        "mode": match args.mode { Mode::Gabp => "gabp", Mode::Double => "double", Mode::Single => "single" },
        "solver": solver_config_json(flags),
    });

    match args.mode {
        Mode::Gabp => {
            let settings = GabpSettings {
                max_iterations: flags.max_inner,
                message_tol: flags.inner_tol.unwrap_or(1e-10),
                ..GabpSettings::default()
            };
            let result = run_gabp(&j, &h, &settings);
            if let Some(path) = &flags.trace {
                let rows = result
                    .residual_history
                    .iter()
                    .enumerate()
                    .map(|(i, c)| format!("{},{c}", i + 1));
                write_trace(path, "iteration,message_change", rows)?;
            }
            let converged = result.status == GabpStatus::Converged;
            let report = RunReport {
                mode: "solve-gabp".into(),
                config,
                status: result.status.to_string(),
                outer_iterations: result.iterations,
                total_inner_sweeps: result.iterations,
                final_residual: Some(j.residual_inf(&result.means, &h)),
                rho_loaded: None,
                dense_max_diff: None,
                solution: Some(result.means),
                detected: None,
                trace: flags.trace.as_ref().map(|p| p.display().to_string()),
                wall_ms: 0,
            };
            finish(report, flags.out.as_deref(), started, converged)
        }
        Mode::Double | Mode::Single => {
            let loading = build_loading(flags)?;
            let settings = build_outer(flags);
            let fix_mode = if args.mode == Mode::Double {
                FixMode::Double
            } else {
                FixMode::Single
            };
            let run = experiment_fixed(&j, &h, &loading, &settings, fix_mode)?;
            let solved = run.report;
            if let Some(path) = &flags.trace {
                write_trace(path, "outer,inner_sweeps,residual", outer_trace_rows(&solved))?;
            }
            let converged = solved.status == SolveStatus::Converged;
            let report = RunReport {
                mode: if args.mode == Mode::Double { "solve-double" } else { "solve-single" }
                    .into(),
                config,
                status: solved.status.to_string(),
                outer_iterations: solved.outer_iterations,
                total_inner_sweeps: solved.inner_iterations_per_step.iter().sum(),
                final_residual: solved.outer_residual_history.last().copied(),
                rho_loaded: Some(solved.rho_loaded),
                dense_max_diff: Some(run.dense_max_diff),
                solution: Some(solved.solution),
                detected: None,
                trace: flags.trace.as_ref().map(|p| p.display().to_string()),
                wall_ms: 0,
            };
            finish(report, flags.out.as_deref(), started, converged)
        }
    }
}

fn cmd_lsq(args: args::LsqArgs, started: Instant) -> Result<i32, CliError> {
    let jt = read_rect_matrix(&args.matrix)?;
    let ht = read_vector(&args.rhs)?;
    if ht.len() != jt.rows() {
        return Err(CliError::Usage(format!(
            "rhs has {} entries but the matrix has {} rows",
            ht.len(),
            jt.rows()
        )));
    }
    let flags = &args.solver;
    let loading = build_loading(flags)?;
    let settings = build_outer(flags);
    let solved =
        gabpfix_core::regularized_lsq_solve(&jt, &ht, args.gamma_reg, &loading, &settings)?;
    if let Some(path) = &flags.trace {
        write_trace(path, "outer,inner_sweeps,residual", outer_trace_rows(&solved))?;
    }
    let converged = solved.status == SolveStatus::Converged;
    let report = RunReport {
        mode: "lsq".into(),
        config: serde_json::json!({
            "matrix": args.matrix.display().to_string(),
            "rhs": args.rhs.display().to_string(),
            "gamma_reg": args.gamma_reg,
            "solver": solver_config_json(flags),
        }),
        status: solved.status.to_string(),
        outer_iterations: solved.outer_iterations,
        total_inner_sweeps: solved.inner_iterations_per_step.iter().sum(),
        final_residual: solved.outer_residual_history.last().copied(),
        rho_loaded: Some(solved.rho_loaded),
        dense_max_diff: None,
        solution: Some(solved.solution),
        detected: None,
        trace: flags.trace.as_ref().map(|p| p.display().to_string()),
        wall_ms: 0,
    };
    finish(report, flags.out.as_deref(), started, converged)
}

fn cdma_config(shared: &args::CdmaShared) -> CdmaConfig {
    CdmaConfig {
        n: shared.n,
        k: shared.k,
        sigma2: shared.sigma2,
        seed: shared.seed,
        spreading: shared.spreading,
    }
}

fn cmd_cdma_diverge(args: args::CdmaDivergeArgs, started: Instant) -> Result<i32, CliError> {
    let config = cdma_config(&args.cdma);
    let inst = gen_cdma(&config)?;
    let settings = GabpSettings {
        max_iterations: args.max_inner,
        message_tol: args.inner_tol,
        divergence_bound: args.divergence_bound,
    };
    let run = experiment_divergence(&inst.a, &inst.y, &settings);
    if let Some(path) = &args.trace {
        let header = std::iter::once("iteration".to_string())
            .chain((0..config.k).map(|i| format!("x{i}")))
            .collect::<Vec<_>>()
            .join(",");
        let rows = run
            .trace
            .iter()
            .map(|(it, means)| format!("{it},{}", csv_floats(means)));
        write_trace(path, &header, rows)?;
    }
    let converged = run.status == GabpStatus::Converged;
    let detected = args
        .detect
        .then(|| run.final_means.as_deref().map(detect_signs))
        .flatten();
    let report = RunReport {
        mode: "cdma-diverge".into(),
        config: serde_json::json!({
            "cdma": config,
            "max_inner": args.max_inner,
            "inner_tol": args.inner_tol,
            "divergence_bound": args.divergence_bound,
        }),
        status: run.status.to_string(),
        outer_iterations: run.iterations,
        total_inner_sweeps: run.iterations,
        final_residual: run
            .final_means
            .as_ref()
            .map(|m| inst.a.residual_inf(m, &inst.y)),
        rho_loaded: None,
        dense_max_diff: None,
        solution: run.final_means,
        detected,
        trace: args.trace.as_ref().map(|p| p.display().to_string()),
        wall_ms: 0,
    };
    finish(report, args.out.as_deref(), started, converged)
}

fn cmd_cdma_fixed(args: args::CdmaFixedArgs, started: Instant) -> Result<i32, CliError> {
    let config = cdma_config(&args.cdma);
    let inst = gen_cdma(&config)?;
    let flags = &args.solver;
    let loading = build_loading(flags)?;
    let settings = build_outer(flags);
    let fix_mode = match args.mode {
        FixedMode::Double => FixMode::Double,
        FixedMode::Single => FixMode::Single,
    };
    let run = experiment_fixed(&inst.a, &inst.y, &loading, &settings, fix_mode)?;
    let solved = run.report;
    if let Some(path) = &flags.trace {
        write_trace(path, "outer,inner_sweeps,residual", outer_trace_rows(&solved))?;
    }
    let converged = solved.status == SolveStatus::Converged;
    let report = RunReport {
        mode: "cdma-fixed".into(),
        config: serde_json::json!({
            "cdma": config,
            "mode": match args.mode { FixedMode::Double => "double", FixedMode::Single => "single" },
            "solver": solver_config_json(flags),
        }),
        status: solved.status.to_string(),
        outer_iterations: solved.outer_iterations,
        total_inner_sweeps: solved.inner_iterations_per_step.iter().sum(),
        final_residual: solved.outer_residual_history.last().copied(),
        rho_loaded: Some(solved.rho_loaded),
        dense_max_diff: Some(run.dense_max_diff),
        detected: args.detect.then(|| detect_signs(&solved.solution)),
        solution: Some(solved.solution),
        trace: flags.trace.as_ref().map(|p| p.display().to_string()),
        wall_ms: 0,
    };
    finish(report, flags.out.as_deref(), started, converged)
}

fn sweep_table_rows(rows: &[SweepRow]) -> Vec<String> {
    rows.iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.gamma_normalized, r.outer_iters, r.avg_inner_iters, r.total_iters, r.status
            )
        })
        .collect()
}

fn cmd_cdma_sweep(args: args::CdmaSweepArgs, started: Instant) -> Result<i32, CliError> {
    if args.grid_points < 2 || args.grid_min <= 0.0 || args.grid_max <= args.grid_min {
        return Err(CliError::Usage(
            "need --grid-points >= 2 and 0 < --grid-min < --grid-max".into(),
        ));
    }
    let config = cdma_config(&args.cdma);
    let inst = gen_cdma(&config)?;
    let sweep_config = SweepConfig {
        gamma_grid: log_spaced_grid(args.grid_min, args.grid_max, args.grid_points),
        inner_tol: args.inner_tol,
        outer_tol: args.outer_tol,
        max_inner: args.max_inner,
        max_outer: args.max_outer,
    };
    let rows = experiment_sweep(&inst.a, &inst.y, &sweep_config)?;

    const TABLE_HEADER: &str = "gamma_normalized,outer_iters,avg_inner_iters,total_iters,status";
    match &args.trace {
        Some(path) => write_trace(path, TABLE_HEADER, sweep_table_rows(&rows))?,
        None => {
            println!("{TABLE_HEADER}");
            for row in sweep_table_rows(&rows) {
                println!("{row}");
            }
        }
    }

    let converged = rows.iter().all(|r| r.status == SolveStatus::Converged);
    let report = RunReport {
        mode: "cdma-sweep".into(),
        config: serde_json::json!({
            "cdma": config,
            "grid_min": args.grid_min,
            "grid_max": args.grid_max,
            "grid_points": args.grid_points,
            "inner_tol": args.inner_tol,
            "outer_tol": args.outer_tol,
            "max_inner": args.max_inner,
            "max_outer": args.max_outer,
        }),
        status: if converged { "converged" } else { "partial" }.into(),
        outer_iterations: rows.iter().map(|r| r.outer_iters).sum(),
        total_inner_sweeps: rows.iter().map(|r| r.total_iters).sum(),
        final_residual: None,
        rho_loaded: None,
        dense_max_diff: None,
        solution: None,
        detected: None,
        trace: args.trace.as_ref().map(|p| p.display().to_string()),
        wall_ms: 0,
    };
    if let Some(path) = &args.out {
        let mut report = report;
        report.wall_ms = started.elapsed().as_millis() as u64;
        eprintln!(
            "cdma-sweep: {} ({} grid points)",
            report.status,
            rows.len()
        );
        write_report(path, &report).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    } else {
        eprintln!(
            "cdma-sweep: {} ({} grid points)",
            report.status,
            rows.len()
        );
    }
    Ok(if converged { 0 } else { 2 })
}
