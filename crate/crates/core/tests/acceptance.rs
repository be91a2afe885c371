//! End-to-end acceptance suite.
//!
//! Each criterion is one test that prints a single summary line with the
//! measured figures, so a full run can be audited from the log. The
//! desk-scale workload (m=8, d=1024, n=8, 10 µs operations, 10 µs commit)
//! is solved and simulated once and shared across the criteria that need it.

use std::sync::OnceLock;
use std::time::Instant;

use lockmodel_core::sim::SplitMix64;
use lockmodel_core::*;

const DESK_THREADS: u32 = 8;
const DESK_ITEMS: usize = 1024;
const DESK_OPS: usize = 8;
const DESK_EACH_US: f64 = 10.0;
const DESK_COMMIT_US: f64 = 10.0;
const DESK_TARGET: u64 = 100_000;
const DESK_WARMUP: u64 = 10_000;

fn desk_spec(pattern: PatternCase) -> WorkloadSpec {
    WorkloadSpec::new(
        DESK_THREADS,
        DataLayout::new(DESK_ITEMS, DESK_OPS).unwrap(),
        OperationProfile::uniform(DESK_OPS, DESK_EACH_US, DESK_COMMIT_US).unwrap(),
        pattern,
    )
}

fn desk_patterns() -> [PatternCase; 4] {
    [
        PatternCase::TablesMixedOrder {
            forward_threads: 4,
            reverse_threads: 4,
        },
        PatternCase::TablesSameOrder,
        PatternCase::ItemsRandom,
        PatternCase::ItemsSorted,
    ]
}

struct DeskRun {
    label: &'static str,
    solution: ModelSolution,
    sim: SimResult,
}

static DESK_RUNS: OnceLock<Vec<DeskRun>> = OnceLock::new();

fn desk_runs() -> &'static [DeskRun] {
    DESK_RUNS.get_or_init(|| {
        desk_patterns()
            .iter()
            .enumerate()
            .map(|(idx, &pattern)| {
                let spec = desk_spec(pattern);
                let solution = solve(&spec, &SolverOptions::default()).unwrap();
                let opts = SimOptions::new(0xD35C + idx as u64, DESK_TARGET, DESK_WARMUP);
                let sim = simulate(&spec, &opts).unwrap();
                DeskRun {
                    label: pattern.label(),
                    solution,
                    sim,
                }
            })
            .collect()
    })
}

fn desk_run(label: &str) -> &'static DeskRun {
    desk_runs().iter().find(|r| r.label == label).unwrap()
}

/// Criterion 1: the closed-form visit counts and the matrix-inversion oracle
/// agree for 200 random conflict vectors per chain length 1..=12 with entries
/// in [0, 0.9]. Visit counts reach 1e6 and beyond under heavy retry, where a
/// fixed absolute tolerance drops below one ulp of the value itself, so the
/// discrepancy is normalized by max(1, |value|).
#[test]
fn criterion_1_closed_form_matches_matrix_oracle() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACC1);
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut largest_count = 0.0f64;
    for n in 1..=12usize {
        for _ in 0..200 {
            let p: Vec<f64> = (0..n).map(|_| rng.next_f64() * 0.9).collect();
            let conflict = ConflictVector::new(p).unwrap();
            let fast = visit_counts(&conflict);
            let slow = visit_counts_reference(&conflict).unwrap();
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                let abs = (a - b).abs();
                worst_abs = worst_abs.max(abs);
                worst = worst.max(abs / b.abs().max(1.0));
                largest_count = largest_count.max(*b);
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        worst <= 1e-10,
        "normalized discrepancy {worst} exceeds 1e-10"
    );
    assert!(elapsed.as_secs_f64() <= 5.0, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: 2400 vectors, max normalized discrepancy {worst:.3e} \
         (raw abs {worst_abs:.3e} at visit counts up to {largest_count:.3e}), {elapsed:?}"
    );
}

/// Criterion 2: the order-statistic pmf matches exhaustive enumeration for
/// every d <= 12, and row sums stay within 1e-9 out to d = 2000, n = 64.
#[test]
fn criterion_2_pmf_exactness_and_row_sums() {
    let started = Instant::now();
    let mut worst_entry = 0.0f64;
    for d in 1..=12usize {
        for n in 1..=d {
            let layout = DataLayout::new(d, n).unwrap();
            let closed = order_stat_pmf(&layout).unwrap();
            let oracle = order_stat_pmf_oracle(&layout).unwrap();
            for i in 0..n {
                for x in 0..d {
                    worst_entry = worst_entry.max((closed.prob(i, x) - oracle.prob(i, x)).abs());
                }
            }
        }
    }
    assert!(
        worst_entry <= 1e-12,
        "pmf vs enumeration discrepancy {worst_entry}"
    );

    let mut worst_drift = 0.0f64;
    for (d, n) in [(100usize, 8usize), (500, 16), (1024, 8), (2000, 64)] {
        let pmf = order_stat_pmf(&DataLayout::new(d, n).unwrap()).unwrap();
        worst_drift = worst_drift.max(pmf.max_row_drift());
        for i in 0..n {
            let sum: f64 = pmf.row(i).iter().sum();
            assert!(
                (sum - 1.0).abs() <= 1e-9,
                "row {i} of ({d},{n}) sums to {sum}"
            );
        }
    }
    assert!(worst_drift <= 1e-9, "raw row drift {worst_drift}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() <= 30.0, "took {elapsed:?}");
    println!(
        "criterion 2 PASS: enumeration discrepancy {worst_entry:.3e}, \
         raw row drift up to d=2000 {worst_drift:.3e}, {elapsed:?}"
    );
}

/// Criterion 3: reduction identities. An empty opposite class reproduces
/// same-order access bit for bit; sorted access with full coverage collapses
/// to direct feedback; the pmf is symmetric under rank/value reflection.
#[test]
fn criterion_3_reduction_identities() {
    let mut rng = SplitMix64::new(0xACC3);
    for _ in 0..50 {
        let n = 1 + rng.next_below(10) as usize;
        let f: Vec<f64> = (0..n).map(|_| 0.01 + 0.99 * rng.next_f64()).collect();
        let m = 1 + rng.next_below(16) as u32;
        let s = 1 + rng.next_below(64) as usize;
        let mixed = conflict_tables_mixed_order(&f, &f, m, 0, s).unwrap();
        let same = conflict_tables_same_order(&f, m, s).unwrap();
        assert_eq!(mixed, same, "mixed order with empty class must be exact");
    }

    let mut worst_sorted = 0.0f64;
    for n in [1usize, 2, 5, 9] {
        let layout = DataLayout::new(n, n).unwrap();
        let pmf = order_stat_pmf(&layout).unwrap();
        let f: Vec<f64> = (0..n)
            .map(|i| 0.9 - 0.8 * i as f64 / n.max(2) as f64)
            .collect();
        for m in [1u32, 2, 5] {
            let p = conflict_items_sorted(&f, m, &pmf).unwrap();
            for (pi, fi) in p.iter().zip(&f) {
                worst_sorted = worst_sorted.max((pi - fi * (m - 1) as f64).abs());
            }
        }
    }
    assert!(
        worst_sorted <= 1e-12,
        "d = n reduction off by {worst_sorted}"
    );

    let mut worst_reflection = 0.0f64;
    for (d, n) in [(4usize, 2usize), (12, 6), (40, 7), (100, 13)] {
        let pmf = order_stat_pmf(&DataLayout::new(d, n).unwrap()).unwrap();
        for i in 0..n {
            for x in 0..d {
                let diff = (pmf.prob(i, x) - pmf.prob(n - 1 - i, d - 1 - x)).abs();
                worst_reflection = worst_reflection.max(diff);
            }
        }
    }
    assert!(
        worst_reflection <= 1e-12,
        "reflection off by {worst_reflection}"
    );
    println!(
        "criterion 3 PASS: empty-class reduction exact, d=n reduction {worst_sorted:.3e}, \
         reflection symmetry {worst_reflection:.3e}"
    );
}

/// Criterion 4: with a single thread every case is exact. The solver returns
/// p = 0 and the conflict-free response, and the simulator measures the same
/// number exactly.
#[test]
fn criterion_4_zero_contention_exactness() {
    let started = Instant::now();
    let base = DESK_OPS as f64 * DESK_EACH_US + DESK_COMMIT_US;
    let patterns = [
        PatternCase::TablesMixedOrder {
            forward_threads: 1,
            reverse_threads: 0,
        },
        PatternCase::TablesSameOrder,
        PatternCase::ItemsRandom,
        PatternCase::ItemsSorted,
    ];
    for pattern in patterns {
        let spec = WorkloadSpec::new(
            1,
            DataLayout::new(DESK_ITEMS, DESK_OPS).unwrap(),
            OperationProfile::uniform(DESK_OPS, DESK_EACH_US, DESK_COMMIT_US).unwrap(),
            pattern,
        );
        let solution = solve(&spec, &SolverOptions::default()).unwrap();
        assert!(solution.converged);
        assert_eq!(solution.response_us, base, "{}", pattern.label());
        for class in &solution.classes {
            assert!(class.conflict.iter().all(|&p| p == 0.0));
        }
        let sim = simulate(&spec, &SimOptions::new(4, 1_000, 0)).unwrap();
        assert_eq!(sim.mean_response_us, base, "{}", pattern.label());
        assert!(sim.abort_probability.iter().all(|&p| p == 0.0));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() <= 1.0, "took {elapsed:?}");
    println!("criterion 4 PASS: all four cases exact at R = {base} µs, {elapsed:?}");
}

/// Criterion 5: at desk scale the model and the simulator agree to 10% on the
/// response time and to 0.02 absolute on every per-operation conflict
/// probability, for each of the four cases.
#[test]
fn criterion_5_model_vs_simulator_agreement() {
    let started = Instant::now();
    let mut lines = Vec::new();
    for run in desk_runs() {
        let rel =
            (run.solution.response_us - run.sim.mean_response_us).abs() / run.sim.mean_response_us;
        assert!(
            rel <= 0.10,
            "{}: model R {} vs sim R {} (rel {:.3})",
            run.label,
            run.solution.response_us,
            run.sim.mean_response_us,
            rel
        );
        let mut worst_p = 0.0f64;
        assert_eq!(run.solution.classes.len(), run.sim.classes.len());
        for (model_class, sim_class) in run.solution.classes.iter().zip(&run.sim.classes) {
            assert_eq!(model_class.class, sim_class.class);
            for (p, p_hat) in model_class
                .conflict
                .iter()
                .zip(&sim_class.abort_probability)
            {
                let diff = (p - p_hat).abs();
                worst_p = worst_p.max(diff);
                assert!(
                    diff <= 0.02,
                    "{} {}: |{} - {}| > 0.02",
                    run.label,
                    model_class.class.label(),
                    p,
                    p_hat
                );
            }
        }
        lines.push(format!(
            "{}: rel dR {:.4}, max |p - p_hat| {:.4}",
            run.label, rel, worst_p
        ));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() <= 240.0, "took {elapsed:?}");
    println!("criterion 5 PASS: {} ({elapsed:?})", lines.join("; "));
}

/// Criterion 6: ordering accesses lowers the response time. Model and
/// simulator must independently rank same-order below mixed-order and sorted
/// below random; margins under 1% are reported as ties.
#[test]
fn criterion_6_ordering_lowers_response_time() {
    let mut notes = Vec::new();
    for (ordered, unordered) in [
        ("tables-same-order", "tables-mixed-order"),
        ("items-sorted", "items-random"),
    ] {
        let fast = desk_run(ordered);
        let slow = desk_run(unordered);

        let model_margin =
            (slow.solution.response_us - fast.solution.response_us) / slow.solution.response_us;
        assert!(
            fast.solution.response_us <= slow.solution.response_us,
            "model ranks {} above {}",
            ordered,
            unordered
        );
        let sim_margin =
            (slow.sim.mean_response_us - fast.sim.mean_response_us) / slow.sim.mean_response_us;
        assert!(
            fast.sim.mean_response_us <= slow.sim.mean_response_us,
            "simulator ranks {} above {}",
            ordered,
            unordered
        );
        let tie = |margin: f64, side: &str| {
            if margin < 0.01 {
                format!("{side} TIE (margin {:.4})", margin)
            } else {
                format!("{side} margin {:.4}", margin)
            }
        };
        notes.push(format!(
            "{} < {}: {}, {}",
            ordered,
            unordered,
            tie(model_margin, "model"),
            tie(sim_margin, "sim")
        ));
    }
    println!("criterion 6 PASS: {}", notes.join("; "));
}

/// Criterion 7: across a contention sweep every solve either converges or
/// comes back flagged, with finite outputs throughout.
#[test]
fn criterion_7_solver_robustness_under_sweep() {
    let mut notes = Vec::new();
    for pattern in desk_patterns() {
        for m in [2u32, 4, 8, 16, 32] {
            let pattern = match pattern {
                PatternCase::TablesMixedOrder { .. } => PatternCase::TablesMixedOrder {
                    forward_threads: m / 2,
                    reverse_threads: m - m / 2,
                },
                other => other,
            };
            let spec = WorkloadSpec::new(
                m,
                DataLayout::new(DESK_ITEMS, DESK_OPS).unwrap(),
                OperationProfile::uniform(DESK_OPS, DESK_EACH_US, DESK_COMMIT_US).unwrap(),
                pattern,
            );
            let solution = solve(&spec, &SolverOptions::default()).unwrap();
            assert!(solution.response_us.is_finite());
            assert!(solution.residual_us.is_finite());
            for class in &solution.classes {
                assert!(class.conflict.iter().all(|p| p.is_finite()));
                assert!(class.response_us.is_finite());
            }
            if !solution.converged {
                assert!(
                    solution.iterations == SolverOptions::default().max_iterations,
                    "non-converged run must have exhausted its budget"
                );
            }
            notes.push(format!(
                "{} m={}: {}{}",
                pattern.label(),
                m,
                if solution.converged { "ok" } else { "no-conv" },
                if solution.saturated { " saturated" } else { "" }
            ));
        }
    }
    println!("criterion 7 PASS: {}", notes.join(", "));
}

/// Criterion 8: the simulator's safety assertions (mutual exclusion, lock
/// release discipline, progress, and the start/commit/abort ledger) are
/// always on; the desk runs plus a deliberately overloaded run complete with
/// zero violations.
#[test]
fn criterion_8_simulator_safety_invariants() {
    let desk_commits: u64 = desk_runs().iter().map(|r| r.sim.commits).sum();
    assert_eq!(desk_commits, 4 * DESK_TARGET);

    // Heavy contention: 16 threads over 16 single-slot tables.
    let spec = WorkloadSpec::new(
        16,
        DataLayout::new(4, 4).unwrap(),
        OperationProfile::uniform(4, 5.0, 5.0).unwrap(),
        PatternCase::TablesSameOrder,
    );
    let result = simulate(&spec, &SimOptions::new(0xACC8, 20_000, 2_000)).unwrap();
    assert_eq!(result.commits, 20_000);
    assert!(result.aborts > 0);
    println!(
        "criterion 8 PASS: in-run assertions held across {} desk commits and an \
         overloaded run with {} aborts",
        desk_commits, result.aborts
    );
}
