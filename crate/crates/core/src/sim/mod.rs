//! Discrete-event simulator for encounter-time locking with abort on conflict.
//!
//! `m` threads each run one transaction at a time. A thread spends the
//! residence time of an operation, then attempts the lock on that operation's
//! item. A conflict with a lock held by another thread releases every lock the
//! transaction holds and restarts it from the first operation at the same
//! instant (deadlock is impossible because nothing ever waits). After the last
//! operation the thread spends the commit time, releases all locks, and starts
//! a fresh transaction. One logical event loop advances the whole world in
//! timestamp order, so a run is a deterministic function of the seed.

mod queue;
mod rng;

pub use queue::{Event, EventKind, EventQueue};
pub use rng::{SplitMix64, PRNG_ALGORITHM};

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::patterns::PatternCase;
use crate::solver::{validate_spec, ThreadClass, WorkloadSpec};

/// Consecutive same-instant aborts by one thread before the run is declared
/// stuck (possible only with zero-length residences under total conflict).
const STALL_CAP: u64 = 1_000_000;

/// Controls for one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimOptions {
    pub seed: u64,
    /// Committed transactions to measure.
    pub target_commits: u64,
    /// Committed transactions discarded before measurement starts.
    pub warmup_commits: u64,
    /// Draw a fresh item sequence after every abort (true) or retry the same
    /// items (false).
    pub redraw_on_restart: bool,
}

impl SimOptions {
    pub fn new(seed: u64, target_commits: u64, warmup_commits: u64) -> Self {
        Self {
            seed,
            target_commits,
            warmup_commits,
            redraw_on_restart: true,
        }
    }
}

/// Kind of a traced lock event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LockEventKind {
    Acquire,
    ConflictAbort,
    ReleaseCommit,
}

impl LockEventKind {
    pub fn label(&self) -> &'static str {
        match self {
            LockEventKind::Acquire => "acquire",
            LockEventKind::ConflictAbort => "conflict-abort",
            LockEventKind::ReleaseCommit => "release-commit",
        }
    }
}

/// One lock event, as passed to the optional trace hook. Operation and item
/// ids are 1-based to match report conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LockEvent {
    pub timestamp_us: f64,
    pub thread: usize,
    pub class: ThreadClass,
    pub op: usize,
    pub item: usize,
    pub kind: LockEventKind,
}

/// Lock-holding intervals of one committed transaction: total time the lock
/// acquired at each operation was held, summed across every attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommitRecord {
    pub class: ThreadClass,
    pub response_us: f64,
    pub holding_us: Vec<f64>,
}

/// Incremental mean that stays bit-exact when every sample is identical,
/// which keeps uncontended runs equal to the analytical values.
#[derive(Debug, Clone, Copy, Default)]
struct RunningMean {
    count: u64,
    mean: f64,
}

impl RunningMean {
    fn push(&mut self, sample: f64) {
        self.count += 1;
        self.mean += (sample - self.mean) / self.count as f64;
    }

    fn value(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }
}

/// Mean holding fraction per operation over a log of committed transactions.
pub fn empirical_lock_fractions(log: &[CommitRecord]) -> Result<Vec<f64>> {
    let first = log.first().ok_or(ModelError::EmptyCommitLog)?;
    let n = first.holding_us.len();
    let mut means = vec![RunningMean::default(); n];
    for record in log {
        for (mean, &holding) in means.iter_mut().zip(&record.holding_us) {
            mean.push(holding / record.response_us);
        }
    }
    Ok(means.into_iter().map(|m| m.value()).collect())
}

/// Per-class slice of a simulation result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSimResult {
    pub class: ThreadClass,
    pub threads: u32,
    pub mean_response_us: f64,
    /// Aborts at each operation divided by lock attempts at it.
    pub abort_probability: Vec<f64>,
    /// Empirical holding fraction per operation.
    pub lock_fractions: Vec<f64>,
    pub commits: u64,
    pub aborts: u64,
}

/// Output of [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mean_response_us: f64,
    /// 95% confidence half-width on the mean response, from batch means.
    /// NaN when there are too few samples to estimate it.
    pub half_width_us: f64,
    pub abort_probability: Vec<f64>,
    pub lock_fractions: Vec<f64>,
    pub commits: u64,
    pub aborts: u64,
    pub classes: Vec<ClassSimResult>,
    pub seed: u64,
    pub prng: &'static str,
    pub redraw_on_restart: bool,
}

struct ThreadState {
    class: ThreadClass,
    class_idx: usize,
    /// Item accessed at each operation in the current attempt (0-based ids).
    items: Vec<usize>,
    /// Operations whose locks are currently held, in acquisition order.
    held_ops: Vec<usize>,
    acquired_at_us: Vec<f64>,
    holding_us: Vec<f64>,
    txn_start_us: f64,
    same_instant_aborts: u64,
    last_abort_us: f64,
}

struct ClassAccum {
    class: ThreadClass,
    threads: u32,
    attempts: Vec<u64>,
    aborts_at: Vec<u64>,
    commits: u64,
    aborts: u64,
    response_mean: RunningMean,
}

/// How one thread class turns operations into item draws.
enum DrawPlan {
    /// Operation `i` draws uniformly in table `i` of size `s`.
    TablesForward { subset: usize },
    /// Operation `i` draws uniformly in table `n - 1 - i`.
    TablesReverse { subset: usize },
    /// `n` distinct uniform items, kept in draw order.
    Distinct,
    /// `n` distinct uniform items, sorted ascending.
    DistinctSorted,
}

fn draw_items(
    plan: &DrawPlan,
    items_total: usize,
    rng: &mut SplitMix64,
    scratch: &mut HashMap<usize, usize>,
    out: &mut [usize],
) {
    let n = out.len();
    match plan {
        DrawPlan::TablesForward { subset } => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = i * subset + rng.next_below(*subset as u64) as usize;
            }
        }
        DrawPlan::TablesReverse { subset } => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = (n - 1 - i) * subset + rng.next_below(*subset as u64) as usize;
            }
        }
        DrawPlan::Distinct => sample_distinct(rng, items_total, scratch, out),
        DrawPlan::DistinctSorted => {
            sample_distinct(rng, items_total, scratch, out);
            out.sort_unstable();
        }
    }
}

/// First `out.len()` entries of a uniform random permutation of `0..total`:
/// a partial Fisher-Yates shuffle over a sparse map.
fn sample_distinct(
    rng: &mut SplitMix64,
    total: usize,
    scratch: &mut HashMap<usize, usize>,
    out: &mut [usize],
) {
    scratch.clear();
    for (j, slot) in out.iter_mut().enumerate() {
        let r = j + rng.next_below((total - j) as u64) as usize;
        let value_j = *scratch.get(&j).unwrap_or(&j);
        let value_r = *scratch.get(&r).unwrap_or(&r);
        *slot = value_r;
        scratch.insert(r, value_j);
    }
}

/// Runs the simulation without trace output.
pub fn simulate(spec: &WorkloadSpec, opts: &SimOptions) -> Result<SimResult> {
    simulate_with_trace(spec, opts, None)
}

/// Runs the simulation, forwarding every lock event (including warmup) to the
/// optional trace hook.
pub fn simulate_with_trace(
    spec: &WorkloadSpec,
    opts: &SimOptions,
    mut trace: Option<&mut dyn FnMut(&LockEvent)>,
) -> Result<SimResult> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(ModelError::InvalidWorkload(violations));
    }
    if opts.target_commits == 0 {
        return Err(ModelError::ZeroTargetCommits);
    }

    let n = spec.layout().operations();
    let d = spec.layout().items();
    let residence = spec.profile().residence_us().to_vec();
    let commit_us = spec.profile().commit_us();
    let classes = spec.thread_classes();

    let plan_for = |class: ThreadClass| -> DrawPlan {
        match spec.pattern() {
            PatternCase::TablesSameOrder => DrawPlan::TablesForward {
                subset: spec.layout().subset_size().expect("validated divisibility"),
            },
            PatternCase::TablesMixedOrder { .. } => {
                let subset = spec.layout().subset_size().expect("validated divisibility");
                if class == ThreadClass::Reverse {
                    DrawPlan::TablesReverse { subset }
                } else {
                    DrawPlan::TablesForward { subset }
                }
            }
            PatternCase::ItemsRandom => DrawPlan::Distinct,
            PatternCase::ItemsSorted => DrawPlan::DistinctSorted,
        }
    };

    let mut rng = SplitMix64::new(opts.seed);
    let mut scratch: HashMap<usize, usize> = HashMap::new();
    let mut queue = EventQueue::new();
    let mut locks: Vec<Option<usize>> = vec![None; d];

    let mut threads: Vec<ThreadState> = Vec::new();
    let mut plans: Vec<DrawPlan> = Vec::new();
    for (class_idx, &(class, count)) in classes.iter().enumerate() {
        for _ in 0..count {
            threads.push(ThreadState {
                class,
                class_idx,
                items: vec![0; n],
                held_ops: Vec::with_capacity(n),
                acquired_at_us: vec![0.0; n],
                holding_us: vec![0.0; n],
                txn_start_us: 0.0,
                same_instant_aborts: 0,
                last_abort_us: -1.0,
            });
            plans.push(plan_for(class));
        }
    }
    let m = threads.len();

    for (idx, thread) in threads.iter_mut().enumerate() {
        draw_items(&plans[idx], d, &mut rng, &mut scratch, &mut thread.items);
        queue.push(residence[0], idx, EventKind::OperationDone { op: 0 });
    }

    // Conservation ledger: every fresh transaction and every attempt is
    // counted so the books can be balanced at the end of the run.
    let mut txn_starts = m as u64;
    let mut attempt_starts = m as u64;
    let mut commits_total = 0u64;
    let mut aborts_total = 0u64;

    let mut measuring = opts.warmup_commits == 0;
    let mut measured = 0u64;
    let mut responses: Vec<f64> = Vec::new();
    let mut commit_log: Vec<CommitRecord> = Vec::new();
    let mut accums: Vec<ClassAccum> = classes
        .iter()
        .map(|&(class, count)| ClassAccum {
            class,
            threads: count,
            attempts: vec![0; n],
            aborts_at: vec![0; n],
            commits: 0,
            aborts: 0,
            response_mean: RunningMean::default(),
        })
        .collect();

    let mut clock = 0.0f64;
    while measured < opts.target_commits {
        // Abort-on-conflict never blocks a thread, so every thread always has
        // exactly one pending event and the loop can always make progress.
        assert_eq!(queue.len(), m, "every thread must have one pending event");
        let event = queue.pop().expect("queue cannot drain before the target");
        assert!(event.time_us >= clock, "time must not run backwards");
        clock = event.time_us;
        let idx = event.thread;
        let thread = &mut threads[idx];

        match event.kind {
            EventKind::OperationDone { op } => {
                let item = thread.items[op];
                match locks[item] {
                    Some(owner) if owner != idx => {
                        // Conflict: abort, release everything, restart now.
                        aborts_total += 1;
                        attempt_starts += 1;
                        if measuring {
                            let acc = &mut accums[thread.class_idx];
                            acc.attempts[op] += 1;
                            acc.aborts_at[op] += 1;
                            acc.aborts += 1;
                        }
                        if let Some(sink) = trace.as_mut() {
                            sink(&LockEvent {
                                timestamp_us: clock,
                                thread: idx,
                                class: thread.class,
                                op: op + 1,
                                item: item + 1,
                                kind: LockEventKind::ConflictAbort,
                            });
                        }
                        for &held in &thread.held_ops {
                            let held_item = thread.items[held];
                            debug_assert_eq!(locks[held_item], Some(idx));
                            locks[held_item] = None;
                            thread.holding_us[held] += clock - thread.acquired_at_us[held];
                        }
                        thread.held_ops.clear();

                        if clock == thread.last_abort_us {
                            thread.same_instant_aborts += 1;
                            if thread.same_instant_aborts > STALL_CAP {
                                return Err(ModelError::SimulationStalled {
                                    thread: idx,
                                    count: thread.same_instant_aborts,
                                    time_us: clock,
                                });
                            }
                        } else {
                            thread.last_abort_us = clock;
                            thread.same_instant_aborts = 1;
                        }

                        if opts.redraw_on_restart {
                            draw_items(&plans[idx], d, &mut rng, &mut scratch, &mut thread.items);
                        }
                        queue.push(
                            clock + residence[0],
                            idx,
                            EventKind::OperationDone { op: 0 },
                        );
                    }
                    Some(_) => unreachable!("a transaction never touches an item twice"),
                    None => {
                        // Mutual exclusion holds by construction: the slot was
                        // free an instant ago and nothing else ran since.
                        locks[item] = Some(idx);
                        thread.held_ops.push(op);
                        thread.acquired_at_us[op] = clock;
                        if measuring {
                            accums[thread.class_idx].attempts[op] += 1;
                        }
                        if let Some(sink) = trace.as_mut() {
                            sink(&LockEvent {
                                timestamp_us: clock,
                                thread: idx,
                                class: thread.class,
                                op: op + 1,
                                item: item + 1,
                                kind: LockEventKind::Acquire,
                            });
                        }
                        if op + 1 < n {
                            queue.push(
                                clock + residence[op + 1],
                                idx,
                                EventKind::OperationDone { op: op + 1 },
                            );
                        } else {
                            queue.push(clock + commit_us, idx, EventKind::CommitDone);
                        }
                    }
                }
            }
            EventKind::CommitDone => {
                commits_total += 1;
                for &held in &thread.held_ops {
                    let held_item = thread.items[held];
                    debug_assert_eq!(locks[held_item], Some(idx));
                    locks[held_item] = None;
                    thread.holding_us[held] += clock - thread.acquired_at_us[held];
                    if let Some(sink) = trace.as_mut() {
                        sink(&LockEvent {
                            timestamp_us: clock,
                            thread: idx,
                            class: thread.class,
                            op: held + 1,
                            item: held_item + 1,
                            kind: LockEventKind::ReleaseCommit,
                        });
                    }
                }
                thread.held_ops.clear();

                let response = clock - thread.txn_start_us;
                if measuring {
                    measured += 1;
                    responses.push(response);
                    let acc = &mut accums[thread.class_idx];
                    acc.commits += 1;
                    acc.response_mean.push(response);
                    commit_log.push(CommitRecord {
                        class: thread.class,
                        response_us: response,
                        holding_us: thread.holding_us.clone(),
                    });
                } else if commits_total >= opts.warmup_commits {
                    measuring = true;
                }

                // Start the next transaction immediately.
                txn_starts += 1;
                attempt_starts += 1;
                thread.txn_start_us = clock;
                thread.holding_us.fill(0.0);
                draw_items(&plans[idx], d, &mut rng, &mut scratch, &mut thread.items);
                queue.push(
                    clock + residence[0],
                    idx,
                    EventKind::OperationDone { op: 0 },
                );
            }
        }
    }

    // Balance the books: every started transaction either committed or is
    // still in flight (exactly one per thread), and every attempt is a fresh
    // start, a restart after abort, or still running.
    assert_eq!(txn_starts, commits_total + m as u64);
    assert_eq!(attempt_starts, commits_total + aborts_total + m as u64);

    let aggregate_fractions = empirical_lock_fractions(&commit_log)?;
    let mut overall_mean = RunningMean::default();
    for &r in &responses {
        overall_mean.push(r);
    }
    let mean_response_us = overall_mean.value();
    let half_width_us = batch_means_half_width(&responses);

    let mut abort_probability = vec![0.0f64; n];
    let mut total_attempts = vec![0u64; n];
    let mut total_aborts_at = vec![0u64; n];
    for acc in &accums {
        for i in 0..n {
            total_attempts[i] += acc.attempts[i];
            total_aborts_at[i] += acc.aborts_at[i];
        }
    }
    for i in 0..n {
        if total_attempts[i] > 0 {
            abort_probability[i] = total_aborts_at[i] as f64 / total_attempts[i] as f64;
        }
    }

    let class_results: Vec<ClassSimResult> = accums
        .iter()
        .map(|acc| {
            let class_log: Vec<CommitRecord> = commit_log
                .iter()
                .filter(|r| r.class == acc.class)
                .cloned()
                .collect();
            let lock_fractions = if class_log.is_empty() {
                vec![f64::NAN; n]
            } else {
                empirical_lock_fractions(&class_log).expect("non-empty class log")
            };
            let mean = acc.response_mean.value();
            let p_hat = (0..n)
                .map(|i| {
                    if acc.attempts[i] > 0 {
                        acc.aborts_at[i] as f64 / acc.attempts[i] as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            ClassSimResult {
                class: acc.class,
                threads: acc.threads,
                mean_response_us: mean,
                abort_probability: p_hat,
                lock_fractions,
                commits: acc.commits,
                aborts: acc.aborts,
            }
        })
        .collect();

    Ok(SimResult {
        mean_response_us,
        half_width_us,
        abort_probability,
        lock_fractions: aggregate_fractions,
        commits: measured,
        aborts: accums.iter().map(|a| a.aborts).sum(),
        classes: class_results,
        seed: opts.seed,
        prng: PRNG_ALGORITHM,
        redraw_on_restart: opts.redraw_on_restart,
    })
}

/// 95% half-width from up to 20 batch means over the response sequence.
fn batch_means_half_width(samples: &[f64]) -> f64 {
    let count = samples.len();
    if count < 4 {
        return f64::NAN;
    }
    let batches = 20usize.min(count / 2);
    let size = count / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| samples[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (batches - 1) as f64;
    let se = (var / batches as f64).sqrt();
    student_t_975(batches - 1) * se
}

fn student_t_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
        2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
        2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}
