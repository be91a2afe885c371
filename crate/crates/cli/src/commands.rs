//! Subcommand implementations.
//!
//! Exit codes: 0 success, 2 configuration error (including workload
//! validation failures), 3 model non-convergence. Report files are written
//! even when the model fails to converge so the diagnostics can be inspected.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use clap::Args;

use lockmodel_core::{
    order_stat_pmf, simulate, simulate_with_trace, solve, validate_spec, LockEvent, ModelError,
    ModelSolution, PatternCase, SimOptions, SimResult, SolverOptions, WorkloadSpec,
};

use crate::config::{
    self, CaseTag, ConfigError, Format, RunConfig, SweepParameter, WorkloadConfig,
};
use crate::report;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;

/// Flags shared by every run-style subcommand.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for report files (default ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the simulator seed from the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report formats to write
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

struct Prepared {
    resolved: RunConfig,
    spec: WorkloadSpec,
    solver_opts: SolverOptions,
    sim_opts: SimOptions,
    out_dir: PathBuf,
    format: Format,
}

fn prepare(args: &RunArgs) -> Result<Prepared, ConfigError> {
    let raw = config::load_config(&args.config)?;
    let spec = config::build_spec(&raw.workload)?;
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(ConfigError(format!(
            "workload validation failed:\n{}",
            list.join("\n")
        )));
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| raw.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = args
        .format
        .or_else(|| raw.output.as_ref().and_then(|o| o.format))
        .unwrap_or(Format::Both);
    let solver_opts = config::build_solver_options(&raw.solver);
    let sim_opts = config::build_sim_options(&raw.sim, args.seed);
    let resolved = raw.resolved(args.seed, &out_dir, format);
    Ok(Prepared {
        resolved,
        spec,
        solver_opts,
        sim_opts,
        out_dir,
        format,
    })
}

fn fail_config(err: &ConfigError) -> anyhow::Result<u8> {
    eprintln!("configuration error: {err}");
    Ok(EXIT_CONFIG)
}

/// Solver and simulator failures that trace back to the configuration keep
/// the configuration exit code.
fn run_model(
    spec: &WorkloadSpec,
    opts: &SolverOptions,
) -> anyhow::Result<Result<ModelSolution, u8>> {
    match solve(spec, opts) {
        Ok(solution) => Ok(Ok(solution)),
        Err(err @ (ModelError::InvalidWorkload(_) | ModelError::InvalidOptions(_))) => {
            eprintln!("configuration error: {err}");
            Ok(Err(EXIT_CONFIG))
        }
        Err(other) => Err(other.into()),
    }
}

fn run_sim(spec: &WorkloadSpec, opts: &SimOptions) -> anyhow::Result<Result<SimResult, u8>> {
    match simulate(spec, opts) {
        Ok(result) => Ok(Ok(result)),
        Err(err @ (ModelError::InvalidWorkload(_) | ModelError::ZeroTargetCommits)) => {
            eprintln!("configuration error: {err}");
            Ok(Err(EXIT_CONFIG))
        }
        Err(other) => Err(other.into()),
    }
}

fn write_solution_reports(prep: &Prepared, solution: &ModelSolution) -> anyhow::Result<()> {
    fs::create_dir_all(&prep.out_dir)?;
    let case = prep.resolved.workload.case.label();
    if prep.format.wants_csv() {
        report::write_text(
            &prep.out_dir.join("solution.csv"),
            &report::solution_csv(case, solution),
        )?;
    }
    if prep.format.wants_json() {
        let access_pmf = match prep.spec.pattern() {
            PatternCase::ItemsSorted => Some(order_stat_pmf(prep.spec.layout())?.to_rows()),
            _ => None,
        };
        report::write_json(
            &prep.out_dir.join("solution.json"),
            &report::SolutionReport {
                config: &prep.resolved,
                solution,
                access_pmf,
            },
        )?;
    }
    Ok(())
}

pub fn cmd_solve(args: &RunArgs) -> anyhow::Result<u8> {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return fail_config(&e),
    };
    let solution = match run_model(&prep.spec, &prep.solver_opts)? {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    write_solution_reports(&prep, &solution)?;
    if solution.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "model did not converge within {} iterations (residual {} µs{})",
            solution.iterations,
            solution.residual_us,
            if solution.saturated {
                ", saturated"
            } else {
                ""
            }
        );
        Ok(EXIT_NO_CONVERGENCE)
    }
}

pub fn cmd_simulate(args: &RunArgs) -> anyhow::Result<u8> {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return fail_config(&e),
    };
    fs::create_dir_all(&prep.out_dir)?;

    let result = if prep.resolved.sim.trace {
        let mut writer = BufWriter::new(File::create(prep.out_dir.join("trace.csv"))?);
        writer.write_all(report::TRACE_CSV_HEADER.as_bytes())?;
        let mut trace_err: Option<std::io::Error> = None;
        let mut sink = |event: &LockEvent| {
            if trace_err.is_some() {
                return;
            }
            if let Err(e) = writeln!(
                writer,
                "{},{},{},{},{},{}",
                event.timestamp_us,
                event.thread,
                event.class.label(),
                event.op,
                event.item,
                event.kind.label()
            ) {
                trace_err = Some(e);
            }
        };
        let outcome = match simulate_with_trace(&prep.spec, &prep.sim_opts, Some(&mut sink)) {
            Ok(result) => Ok(result),
            Err(err @ (ModelError::InvalidWorkload(_) | ModelError::ZeroTargetCommits)) => {
                eprintln!("configuration error: {err}");
                return Ok(EXIT_CONFIG);
            }
            Err(other) => Err(other),
        };
        if let Some(e) = trace_err {
            return Err(e.into());
        }
        outcome?
    } else {
        match run_sim(&prep.spec, &prep.sim_opts)? {
            Ok(result) => result,
            Err(code) => return Ok(code),
        }
    };

    let case = prep.resolved.workload.case.label();
    if prep.format.wants_csv() {
        report::write_text(
            &prep.out_dir.join("sim.csv"),
            &report::sim_csv(case, &result),
        )?;
    }
    if prep.format.wants_json() {
        report::write_json(
            &prep.out_dir.join("sim.json"),
            &report::SimReport {
                config: &prep.resolved,
                result: &result,
            },
        )?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_compare(args: &RunArgs) -> anyhow::Result<u8> {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return fail_config(&e),
    };
    let solution = match run_model(&prep.spec, &prep.solver_opts)? {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    let sim = match run_sim(&prep.spec, &prep.sim_opts)? {
        Ok(r) => r,
        Err(code) => return Ok(code),
    };
    fs::create_dir_all(&prep.out_dir)?;
    report::write_text(
        &prep.out_dir.join("compare.csv"),
        &report::compare_csv(&solution, &sim),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(args: &RunArgs) -> anyhow::Result<u8> {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return fail_config(&e),
    };
    let Some(sweep) = prep.resolved.sweep.clone() else {
        return fail_config(&ConfigError(
            "sweep section is required for this command".into(),
        ));
    };
    if sweep.values.is_empty() {
        return fail_config(&ConfigError("sweep.values must not be empty".into()));
    }
    let cases = sweep
        .cases
        .clone()
        .unwrap_or_else(|| vec![prep.resolved.workload.case]);

    let mut csv = String::from(report::SWEEP_CSV_HEADER);
    for &value in &sweep.values {
        for &case in &cases {
            let workload =
                match patch_workload(&prep.resolved.workload, sweep.parameter, value, case) {
                    Ok(w) => w,
                    Err(e) => return fail_config(&e),
                };
            let spec = match config::build_spec(&workload) {
                Ok(s) => s,
                Err(e) => {
                    return fail_config(&ConfigError(format!(
                        "sweep point {value} ({}): {e}",
                        case.label()
                    )))
                }
            };
            let violations = validate_spec(&spec);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return fail_config(&ConfigError(format!(
                    "sweep point {value} ({}): {}",
                    case.label(),
                    list.join("; ")
                )));
            }
            let solution = match run_model(&spec, &prep.solver_opts)? {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let sim_response = if sweep.simulate {
                match run_sim(&spec, &prep.sim_opts)? {
                    Ok(r) => Some(r.mean_response_us),
                    Err(code) => return Ok(code),
                }
            } else {
                None
            };
            report::sweep_csv_row(&mut csv, value, case.label(), &solution, sim_response);
        }
    }
    fs::create_dir_all(&prep.out_dir)?;
    report::write_text(&prep.out_dir.join("sweep.csv"), &csv)?;
    Ok(EXIT_OK)
}

pub fn cmd_echo(config_path: &Path) -> anyhow::Result<u8> {
    let config = match config::load_config(config_path) {
        Ok(c) => c,
        Err(e) => return fail_config(&e),
    };
    println!("{}", serde_json::to_string_pretty(&config)?);
    Ok(EXIT_OK)
}

/// Applies one sweep point to the workload. A swept thread count keeps the
/// mixed-order split in the base config's proportion (forward rounded,
/// at least one thread).
fn patch_workload(
    base: &WorkloadConfig,
    parameter: SweepParameter,
    value: u64,
    case: CaseTag,
) -> Result<WorkloadConfig, ConfigError> {
    if value == 0 {
        return Err(ConfigError(format!(
            "sweep value 0 is not valid for parameter {parameter:?}"
        )));
    }
    let mut workload = base.clone();
    workload.case = case;
    match parameter {
        SweepParameter::M => {
            workload.m = u32::try_from(value).map_err(|_| {
                ConfigError(format!("sweep value {value} exceeds the thread limit"))
            })?;
            if case == CaseTag::TablesMixedOrder {
                if let (Some(forward), Some(reverse)) = (base.m_forward, base.m_reverse) {
                    let total = (forward + reverse).max(1) as f64;
                    let scaled = (workload.m as f64 * forward as f64 / total).round() as u32;
                    let forward_new = scaled.clamp(1, workload.m);
                    workload.m_forward = Some(forward_new);
                    workload.m_reverse = Some(workload.m - forward_new);
                }
            }
        }
        SweepParameter::N => {
            workload.n = value as usize;
        }
        SweepParameter::D => {
            workload.d = value as usize;
        }
    }
    Ok(workload)
}
