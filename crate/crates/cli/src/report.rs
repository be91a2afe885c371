//! Report emission: fixed-column CSV plus JSON carrying the resolved config.
//!
//! Column orders are part of the tool's contract and are pinned by golden
//! tests. Values are written with Rust's shortest round-trip float formatting,
//! so a fixed seed produces byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use lockmodel_core::{ModelSolution, SimResult};

use crate::config::RunConfig;

/// `solution.json` payload.
#[derive(Serialize)]
pub struct SolutionReport<'a> {
    pub config: &'a RunConfig,
    pub solution: &'a ModelSolution,
    /// Access pmf rows (operation by item), present for sorted item access.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub access_pmf: Option<Vec<Vec<f64>>>,
}

/// `sim.json` payload.
#[derive(Serialize)]
pub struct SimReport<'a> {
    pub config: &'a RunConfig,
    pub result: &'a SimResult,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text)
}

/// Per-operation model rows, one response row per class, then aggregate
/// summary rows. Summary rows carry their label in the `i` column and their
/// value in the `p_i` column.
pub fn solution_csv(case: &str, solution: &ModelSolution) -> String {
    let mut out = String::from("case,class,i,p_i,N1_i,l_i,f_i\n");
    for class in &solution.classes {
        let label = class.class.label();
        for i in 0..class.conflict.len() {
            writeln!(
                out,
                "{case},{label},{},{},{},{},{}",
                i + 1,
                class.conflict[i],
                class.visits[i],
                class.holding_us[i],
                class.fractions[i]
            )
            .unwrap();
        }
        writeln!(out, "{case},{label},R,{},,,", class.response_us).unwrap();
    }
    writeln!(out, "{case},aggregate,R,{},,,", solution.response_us).unwrap();
    writeln!(
        out,
        "{case},aggregate,iterations,{},,,",
        solution.iterations
    )
    .unwrap();
    writeln!(out, "{case},aggregate,converged,{},,,", solution.converged).unwrap();
    out
}

/// Per-operation measured rows per class plus summary rows; the aggregate
/// section repeats the per-operation rows only when there are several classes.
pub fn sim_csv(case: &str, result: &SimResult) -> String {
    let mut out = String::from("case,class,i,p_hat_i,f_hat_i\n");
    for class in &result.classes {
        let label = class.class.label();
        for i in 0..class.abort_probability.len() {
            writeln!(
                out,
                "{case},{label},{},{},{}",
                i + 1,
                class.abort_probability[i],
                class.lock_fractions[i]
            )
            .unwrap();
        }
        writeln!(out, "{case},{label},mean_R,{},", class.mean_response_us).unwrap();
        writeln!(out, "{case},{label},commits,{},", class.commits).unwrap();
        writeln!(out, "{case},{label},aborts,{},", class.aborts).unwrap();
    }
    if result.classes.len() > 1 {
        for i in 0..result.abort_probability.len() {
            writeln!(
                out,
                "{case},aggregate,{},{},{}",
                i + 1,
                result.abort_probability[i],
                result.lock_fractions[i]
            )
            .unwrap();
        }
    }
    writeln!(out, "{case},aggregate,mean_R,{},", result.mean_response_us).unwrap();
    writeln!(
        out,
        "{case},aggregate,half_width_R,{},",
        result.half_width_us
    )
    .unwrap();
    writeln!(out, "{case},aggregate,commits,{},", result.commits).unwrap();
    writeln!(out, "{case},aggregate,aborts,{},", result.aborts).unwrap();
    writeln!(out, "{case},aggregate,seed,{},", result.seed).unwrap();
    writeln!(out, "{case},aggregate,prng,{},", result.prng).unwrap();
    writeln!(
        out,
        "{case},aggregate,redraw_on_restart,{},",
        result.redraw_on_restart
    )
    .unwrap();
    out
}

/// Model-vs-simulation table: the response time, then per-class conflict and
/// holding-fraction rows, then model diagnostics. Class suffixes appear only
/// when the workload has two thread classes.
pub fn compare_csv(solution: &ModelSolution, sim: &SimResult) -> String {
    let mut out = String::from("quantity,model,simulated,abs_diff,rel_diff\n");
    push_compare_row(&mut out, "R", solution.response_us, sim.mean_response_us);

    let multi = solution.classes.len() > 1;
    for (model_class, sim_class) in solution.classes.iter().zip(&sim.classes) {
        let suffix = if multi {
            format!("[{}]", model_class.class.label())
        } else {
            String::new()
        };
        if multi {
            push_compare_row(
                &mut out,
                &format!("R{suffix}"),
                model_class.response_us,
                sim_class.mean_response_us,
            );
        }
        for (i, (p, p_hat)) in model_class
            .conflict
            .iter()
            .zip(&sim_class.abort_probability)
            .enumerate()
        {
            push_compare_row(&mut out, &format!("p_{}{suffix}", i + 1), *p, *p_hat);
        }
        for (i, (f, f_hat)) in model_class
            .fractions
            .iter()
            .zip(&sim_class.lock_fractions)
            .enumerate()
        {
            push_compare_row(&mut out, &format!("f_{}{suffix}", i + 1), *f, *f_hat);
        }
    }
    writeln!(out, "model_converged,{},,,", solution.converged).unwrap();
    writeln!(out, "model_saturated,{},,,", solution.saturated).unwrap();
    out
}

fn push_compare_row(out: &mut String, quantity: &str, model: f64, simulated: f64) {
    let abs = (model - simulated).abs();
    let rel = if abs == 0.0 {
        "0".to_string()
    } else if model != 0.0 {
        format!("{}", abs / model.abs())
    } else {
        String::new()
    };
    writeln!(out, "{quantity},{model},{simulated},{abs},{rel}").unwrap();
}

pub const SWEEP_CSV_HEADER: &str = "sweep_value,case,R_model,R_sim,p_max,iterations\n";

pub fn sweep_csv_row(
    out: &mut String,
    value: u64,
    case: &str,
    solution: &ModelSolution,
    sim_response: Option<f64>,
) {
    let r_sim = sim_response.map(|r| r.to_string()).unwrap_or_default();
    writeln!(
        out,
        "{value},{case},{},{r_sim},{},{}",
        solution.response_us,
        solution.max_conflict(),
        solution.iterations
    )
    .unwrap();
}

pub const TRACE_CSV_HEADER: &str = "timestamp_us,thread_id,class,op_index,item_id,event_kind\n";
