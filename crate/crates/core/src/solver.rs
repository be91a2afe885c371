//! Fixed-point solution of the contention model.
//!
//! Conflict probabilities determine visit counts, response time, and lock
//! holding fractions; the access pattern maps those fractions back to conflict
//! probabilities. The solver starts from zero conflict and iterates that loop
//! until the response time stops moving, with damping and clamping safeguards
//! for workloads pushed past their stable range.

use serde::Serialize;

use crate::chain::{self, ConflictVector, LockProfile, OperationProfile, VisitCounts};
use crate::error::{ModelError, Result, Violation};
use crate::patterns::{self, AccessPmf, DataLayout, PatternCase};

/// Thread population a solution row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreadClass {
    /// Every thread (single-class patterns).
    All,
    /// Threads walking the tables first-to-last.
    Forward,
    /// Threads walking the tables last-to-first.
    Reverse,
}

impl ThreadClass {
    pub fn label(&self) -> &'static str {
        match self {
            ThreadClass::All => "all",
            ThreadClass::Forward => "forward",
            ThreadClass::Reverse => "reverse",
        }
    }
}

/// Complete description of one workload to model or simulate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadSpec {
    threads: u32,
    layout: DataLayout,
    profile: OperationProfile,
    pattern: PatternCase,
}

impl WorkloadSpec {
    /// Assembles a spec without validating cross-field invariants; run
    /// [`validate_spec`] (or let `solve`/`simulate` do it) before use.
    pub fn new(
        threads: u32,
        layout: DataLayout,
        profile: OperationProfile,
        pattern: PatternCase,
    ) -> Self {
        Self {
            threads,
            layout,
            profile,
            pattern,
        }
    }

    pub fn threads(&self) -> u32 {
        self.threads
    }

    pub fn layout(&self) -> &DataLayout {
        &self.layout
    }

    pub fn profile(&self) -> &OperationProfile {
        &self.profile
    }

    pub fn pattern(&self) -> &PatternCase {
        &self.pattern
    }

    /// Thread classes with a non-zero population, in reporting order.
    pub fn thread_classes(&self) -> Vec<(ThreadClass, u32)> {
        match self.pattern {
            PatternCase::TablesMixedOrder {
                forward_threads,
                reverse_threads,
            } => {
                let mut classes = vec![(ThreadClass::Forward, forward_threads)];
                if reverse_threads > 0 {
                    classes.push((ThreadClass::Reverse, reverse_threads));
                }
                classes
            }
            _ => vec![(ThreadClass::All, self.threads)],
        }
    }
}

/// Iteration controls for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Stop once the largest per-class response-time change falls below this.
    pub epsilon_us: f64,
    pub max_iterations: u32,
    /// Blend weight for new conflict candidates, in `(0, 1]`.
    pub damping: f64,
    /// Upper bound applied to every conflict probability before it re-enters
    /// the chain arithmetic.
    pub clamp: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon_us: 1e-3,
            max_iterations: 10_000,
            damping: 1.0,
            clamp: 1.0 - 1e-9,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !self.epsilon_us.is_finite() || self.epsilon_us <= 0.0 {
            return Err(ModelError::InvalidOptions(format!(
                "epsilon_us must be positive, got {}",
                self.epsilon_us
            )));
        }
        if self.max_iterations == 0 {
            return Err(ModelError::InvalidOptions(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ModelError::InvalidOptions(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.clamp > 0.0 && self.clamp < 1.0) {
            return Err(ModelError::InvalidOptions(format!(
                "clamp must lie in (0, 1), got {}",
                self.clamp
            )));
        }
        Ok(())
    }
}

/// Converged (or best-effort) model state for one thread class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSolution {
    pub class: ThreadClass,
    pub threads: u32,
    /// Conflict probability per operation.
    pub conflict: Vec<f64>,
    /// Expected visits per operation state.
    pub visits: Vec<f64>,
    /// Mean response time in microseconds.
    pub response_us: f64,
    /// Mean lock holding time per operation in microseconds.
    pub holding_us: Vec<f64>,
    /// Holding-time fraction per operation.
    pub fractions: Vec<f64>,
}

/// Output of [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSolution {
    pub classes: Vec<ClassSolution>,
    /// Thread-weighted mean response time across classes, microseconds.
    pub response_us: f64,
    pub iterations: u32,
    pub converged: bool,
    /// Final response-time change, microseconds.
    pub residual_us: f64,
    /// True when any conflict candidate had to be clamped; the workload has
    /// no meaningful fixed point at that contention level.
    pub saturated: bool,
    /// Damping in effect when iteration stopped (may be lower than requested
    /// if oscillation was detected).
    pub final_damping: f64,
}

impl ModelSolution {
    /// Largest conflict probability across classes and operations.
    pub fn max_conflict(&self) -> f64 {
        self.classes
            .iter()
            .flat_map(|c| c.conflict.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// One chain evaluation plus the conflict candidates it implies.
#[derive(Debug, Clone)]
pub struct IterationStep {
    /// Mean response time per class, microseconds.
    pub response_us: Vec<f64>,
    /// Clamped conflict candidates per class (no damping applied).
    pub next_conflict: Vec<Vec<f64>>,
}

/// Checks every cross-field invariant of a workload; an empty list means the
/// spec is usable.
pub fn validate_spec(spec: &WorkloadSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    let d = spec.layout.items();
    let n = spec.layout.operations();

    if spec.threads == 0 {
        violations.push(Violation::new(
            "zero_threads",
            "thread count m must be at least 1",
        ));
    }
    if spec.profile.len() != n {
        violations.push(Violation::new(
            "profile_length_mismatch",
            format!(
                "operation profile has {} durations but the layout defines n={} operations",
                spec.profile.len(),
                n
            ),
        ));
    }
    match spec.pattern {
        PatternCase::TablesMixedOrder {
            forward_threads,
            reverse_threads,
        } => {
            if forward_threads == 0 {
                violations.push(Violation::new(
                    "zero_forward_threads",
                    "mixed-order pattern requires at least one forward thread",
                ));
            }
            if forward_threads.saturating_add(reverse_threads) != spec.threads {
                violations.push(Violation::new(
                    "thread_split_mismatch",
                    format!(
                        "forward {} + reverse {} must equal m={}",
                        forward_threads, reverse_threads, spec.threads
                    ),
                ));
            }
            if spec.layout.subset_size().is_none() {
                violations.push(divisibility_violation(d, n));
            }
        }
        PatternCase::TablesSameOrder => {
            if spec.layout.subset_size().is_none() {
                violations.push(divisibility_violation(d, n));
            }
        }
        PatternCase::ItemsRandom | PatternCase::ItemsSorted => {
            if n > d {
                violations.push(Violation::new(
                    "n_exceeds_d",
                    format!("n={} operations exceed the d={} available items", n, d),
                ));
            }
        }
    }
    violations
}

fn divisibility_violation(d: usize, n: usize) -> Violation {
    Violation::new(
        "d_not_divisible_by_n",
        format!("d={} items cannot be split into n={} equal tables", d, n),
    )
}

struct ClassEval {
    visits: VisitCounts,
    lock: LockProfile,
}

fn evaluate_chain(
    spec: &WorkloadSpec,
    conflict: &[Vec<f64>],
    iteration: u32,
) -> Result<Vec<ClassEval>> {
    conflict
        .iter()
        .map(|probs| {
            let vector = ConflictVector::new(probs.clone())?;
            let visits = chain::visit_counts(&vector);
            let lock = LockProfile::derive(&visits, spec.profile())?;
            if !lock.response_us.is_finite() {
                return Err(ModelError::NonFinite {
                    what: "response time",
                    iteration,
                });
            }
            Ok(ClassEval { visits, lock })
        })
        .collect()
}

fn conflict_candidates(
    spec: &WorkloadSpec,
    evals: &[ClassEval],
    pmf: Option<&AccessPmf>,
) -> Result<Vec<Vec<f64>>> {
    match spec.pattern {
        PatternCase::TablesSameOrder => {
            let s = spec.layout.subset_size().expect("validated divisibility");
            Ok(vec![patterns::conflict_tables_same_order(
                &evals[0].lock.fractions,
                spec.threads,
                s,
            )?])
        }
        PatternCase::TablesMixedOrder {
            forward_threads,
            reverse_threads,
        } => {
            let s = spec.layout.subset_size().expect("validated divisibility");
            let forward_fractions = &evals[0].lock.fractions;
            if evals.len() == 1 {
                return Ok(vec![patterns::conflict_tables_mixed_order(
                    forward_fractions,
                    forward_fractions,
                    forward_threads,
                    0,
                    s,
                )?]);
            }
            let reverse_fractions = &evals[1].lock.fractions;
            Ok(vec![
                patterns::conflict_tables_mixed_order(
                    forward_fractions,
                    reverse_fractions,
                    forward_threads,
                    reverse_threads,
                    s,
                )?,
                patterns::conflict_tables_mixed_order(
                    reverse_fractions,
                    forward_fractions,
                    reverse_threads,
                    forward_threads,
                    s,
                )?,
            ])
        }
        PatternCase::ItemsRandom => Ok(vec![patterns::conflict_items_random(
            &evals[0].lock.fractions,
            spec.threads,
            spec.layout(),
        )?]),
        PatternCase::ItemsSorted => Ok(vec![patterns::conflict_items_sorted(
            &evals[0].lock.fractions,
            spec.threads,
            pmf.expect("pmf computed for sorted access"),
        )?]),
    }
}

/// Runs one full model iteration from the given per-class conflict
/// probabilities and returns the responses plus the clamped next candidates.
/// Useful for checking that a returned solution really is a fixed point.
pub fn iterate_model(
    spec: &WorkloadSpec,
    opts: &SolverOptions,
    conflict: &[Vec<f64>],
) -> Result<IterationStep> {
    opts.validate()?;
    let pmf = match spec.pattern {
        PatternCase::ItemsSorted => Some(patterns::order_stat_pmf(spec.layout())?),
        _ => None,
    };
    let evals = evaluate_chain(spec, conflict, 0)?;
    let candidates = conflict_candidates(spec, &evals, pmf.as_ref())?;
    Ok(IterationStep {
        response_us: evals.iter().map(|e| e.lock.response_us).collect(),
        next_conflict: candidates
            .into_iter()
            .map(|cand| cand.into_iter().map(|v| v.clamp(0.0, opts.clamp)).collect())
            .collect(),
    })
}

/// Consecutive non-improving iterations tolerated before damping drops to 0.5.
const OSCILLATION_WINDOW: u32 = 10;

/// Iterates the model to a fixed point.
///
/// Starts from zero conflict and zero response, evaluates the chain and the
/// pattern equations each round, and stops when the largest per-class
/// response-time change drops below `epsilon_us`. Candidates are blended with
/// the previous probabilities by `damping` and clamped to `[0, clamp]`; if
/// the residual fails to improve for ten straight rounds the damping falls
/// back to 0.5. Always returns the last evaluated state, flagged with
/// `converged`/`saturated` diagnostics.
pub fn solve(spec: &WorkloadSpec, opts: &SolverOptions) -> Result<ModelSolution> {
    opts.validate()?;
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(ModelError::InvalidWorkload(violations));
    }

    let classes = spec.thread_classes();
    let n = spec.layout().operations();
    // The access pmf depends only on the layout, so build it once up front.
    let pmf = match spec.pattern {
        PatternCase::ItemsSorted => Some(patterns::order_stat_pmf(spec.layout())?),
        _ => None,
    };

    let mut conflict: Vec<Vec<f64>> = vec![vec![0.0; n]; classes.len()];
    let mut prev_response: Vec<f64> = vec![0.0; classes.len()];
    let mut damping = opts.damping;
    let mut saturated = false;
    let mut prev_residual = f64::INFINITY;
    let mut stall_streak = 0u32;

    let mut iteration = 0u32;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut evals: Vec<ClassEval> = Vec::new();

    while iteration < opts.max_iterations {
        iteration += 1;
        evals = evaluate_chain(spec, &conflict, iteration)?;

        residual = evals
            .iter()
            .zip(&prev_response)
            .map(|(eval, prev)| (eval.lock.response_us - prev).abs())
            .fold(0.0, f64::max);
        if residual < opts.epsilon_us {
            converged = true;
            break;
        }

        let candidates = conflict_candidates(spec, &evals, pmf.as_ref())?;
        for (current, candidate) in conflict.iter_mut().zip(&candidates) {
            for (slot, &cand) in current.iter_mut().zip(candidate) {
                let blended = damping * cand + (1.0 - damping) * *slot;
                if !blended.is_finite() {
                    return Err(ModelError::NonFinite {
                        what: "conflict probability",
                        iteration,
                    });
                }
                if blended > opts.clamp {
                    saturated = true;
                }
                *slot = blended.clamp(0.0, opts.clamp);
            }
        }

        if residual >= prev_residual {
            stall_streak += 1;
            if stall_streak >= OSCILLATION_WINDOW && damping > 0.5 {
                damping = 0.5;
                stall_streak = 0;
            }
        } else {
            stall_streak = 0;
        }
        prev_residual = residual;
        for (prev, eval) in prev_response.iter_mut().zip(&evals) {
            *prev = eval.lock.response_us;
        }
    }

    let class_solutions: Vec<ClassSolution> = classes
        .iter()
        .zip(conflict)
        .zip(evals)
        .map(|((&(class, threads), probs), eval)| ClassSolution {
            class,
            threads,
            conflict: probs,
            visits: eval.visits.as_slice().to_vec(),
            response_us: eval.lock.response_us,
            holding_us: eval.lock.holding_us,
            fractions: eval.lock.fractions,
        })
        .collect();

    let total_threads: f64 = class_solutions.iter().map(|c| f64::from(c.threads)).sum();
    let response_us = class_solutions
        .iter()
        .map(|c| f64::from(c.threads) * c.response_us)
        .sum::<f64>()
        / total_threads;

    Ok(ModelSolution {
        classes: class_solutions,
        response_us,
        iterations: iteration,
        converged,
        residual_us: residual,
        saturated,
        final_damping: damping,
    })
}
