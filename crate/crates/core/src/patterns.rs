//! Conflict-probability estimators for the supported data-access patterns.
//!
//! Four patterns are covered. Transactions either walk `n` disjoint tables
//! (all threads in the same order, or two thread classes in opposite orders)
//! or pick `n` distinct items out of one table of `d` items (kept in draw
//! order, or sorted ascending before execution). Sorted access turns the item
//! touched at each operation into an order statistic of the sampled set, so
//! that case is driven by an exact sampling-without-replacement pmf.
//!
//! All estimators return raw per-operation conflict estimates. They are not
//! clamped here; values can reach or exceed 1 under extreme contention and it
//! is the caller's job (normally the solver) to clamp before feeding them back
//! into the chain arithmetic.

use serde::Serialize;

use crate::error::{ModelError, Result};

/// Number of subset enumerations the pmf oracle will tolerate.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Row-sum drift beyond which a computed pmf row is renormalized.
pub const PMF_DRIFT_LIMIT: f64 = 1e-12;

/// Which access pattern the workload follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum PatternCase {
    /// Disjoint tables, two thread classes walking them in opposite orders.
    TablesMixedOrder {
        forward_threads: u32,
        reverse_threads: u32,
    },
    /// Disjoint tables, every thread walks them in the same order.
    TablesSameOrder,
    /// Single table, each transaction touches `n` distinct items in draw order.
    ItemsRandom,
    /// Single table, the `n` distinct items are sorted ascending before use.
    ItemsSorted,
}

impl PatternCase {
    /// Stable tag used in configuration files and report output.
    pub fn label(&self) -> &'static str {
        match self {
            PatternCase::TablesMixedOrder { .. } => "tables-mixed-order",
            PatternCase::TablesSameOrder => "tables-same-order",
            PatternCase::ItemsRandom => "items-random",
            PatternCase::ItemsSorted => "items-sorted",
        }
    }

    /// True for the patterns that partition the items into per-operation tables.
    pub fn uses_tables(&self) -> bool {
        matches!(
            self,
            PatternCase::TablesMixedOrder { .. } | PatternCase::TablesSameOrder
        )
    }
}

/// Shared-data geometry: `d` items accessed by transactions of `n` operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DataLayout {
    items: usize,
    operations: usize,
}

impl DataLayout {
    pub fn new(items: usize, operations: usize) -> Result<Self> {
        if items == 0 {
            return Err(ModelError::EmptyDataSet);
        }
        if operations == 0 {
            return Err(ModelError::NoOperations);
        }
        Ok(Self { items, operations })
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn operations(&self) -> usize {
        self.operations
    }

    /// Table size `s = d / n` for the table-partitioned patterns; the item
    /// count must divide evenly.
    pub fn subset_size(&self) -> Option<usize> {
        self.items
            .is_multiple_of(self.operations)
            .then(|| self.items / self.operations)
    }
}

/// Probability that operation `i` touches item `x` under sorted access:
/// an `n` by `d` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPmf {
    operations: usize,
    items: usize,
    probs: Vec<f64>,
    max_row_drift: f64,
    renormalized: bool,
}

impl AccessPmf {
    pub fn operations(&self) -> usize {
        self.operations
    }

    pub fn items(&self) -> usize {
        self.items
    }

    /// Probability that operation `op` (0-based) accesses item `item` (0-based).
    pub fn prob(&self, op: usize, item: usize) -> f64 {
        self.probs[op * self.items + item]
    }

    pub fn row(&self, op: usize) -> &[f64] {
        &self.probs[op * self.items..(op + 1) * self.items]
    }

    /// Largest absolute row-sum deviation from 1 observed before any
    /// renormalization.
    pub fn max_row_drift(&self) -> f64 {
        self.max_row_drift
    }

    /// Whether any row needed renormalization.
    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.operations).map(|i| self.row(i).to_vec()).collect()
    }

    fn from_rows(operations: usize, items: usize, mut probs: Vec<f64>) -> Self {
        let mut max_drift = 0.0f64;
        let mut renormalized = false;
        for i in 0..operations {
            let row = &mut probs[i * items..(i + 1) * items];
            let sum: f64 = row.iter().sum();
            let drift = (sum - 1.0).abs();
            max_drift = max_drift.max(drift);
            if drift > PMF_DRIFT_LIMIT {
                renormalized = true;
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
        }
        Self {
            operations,
            items,
            probs,
            max_row_drift: max_drift,
            renormalized,
        }
    }
}

/// All threads walk the tables in the same order: a transaction at operation
/// `i` collides with any of the other `m - 1` transactions currently holding
/// its uniformly chosen item, giving `p_i = (m - 1) f_i / s`.
pub fn conflict_tables_same_order(
    fractions: &[f64],
    threads: u32,
    subset_size: usize,
) -> Result<Vec<f64>> {
    if subset_size == 0 {
        return Err(ModelError::ZeroSubsetSize);
    }
    if fractions.is_empty() {
        return Err(ModelError::Empty {
            what: "fraction vector",
        });
    }
    let peers = threads.saturating_sub(1) as f64;
    let s = subset_size as f64;
    // Same operation shape as the mixed-order estimator so that the two agree
    // bit for bit when the opposite class is empty.
    Ok(fractions.iter().map(|f| peers * f / s).collect())
}

/// Two thread classes walk the tables in opposite orders. From the viewpoint
/// of one class ("own"), the conflict at operation `i` combines same-class
/// peers holding their operation-`i` lock and opposite-class threads holding
/// the lock they acquired at the mirrored operation `n - i + 1`:
/// `p_i = [(m_own - 1) f_own_i + m_opp * f_opp_{n-i+1}] / s`.
///
/// With `opp_threads = 0` this reduces exactly to
/// [`conflict_tables_same_order`].
pub fn conflict_tables_mixed_order(
    own_fractions: &[f64],
    opp_fractions: &[f64],
    own_threads: u32,
    opp_threads: u32,
    subset_size: usize,
) -> Result<Vec<f64>> {
    if subset_size == 0 {
        return Err(ModelError::ZeroSubsetSize);
    }
    if own_fractions.len() != opp_fractions.len() {
        return Err(ModelError::LengthMismatch {
            left: own_fractions.len(),
            right: opp_fractions.len(),
        });
    }
    if own_fractions.is_empty() {
        return Err(ModelError::Empty {
            what: "fraction vector",
        });
    }
    let n = own_fractions.len();
    let s = subset_size as f64;
    let own_peers = own_threads.saturating_sub(1) as f64;
    let opp = opp_threads as f64;
    Ok((0..n)
        .map(|i| (own_peers * own_fractions[i] + opp * opp_fractions[n - 1 - i]) / s)
        .collect())
}

/// Arithmetic mean of the holding fractions.
pub fn avg_fraction(fractions: &[f64]) -> Result<f64> {
    if fractions.is_empty() {
        return Err(ModelError::Empty {
            what: "fraction vector",
        });
    }
    Ok(fractions.iter().sum::<f64>() / fractions.len() as f64)
}

/// Unordered random access over one table: every operation conflicts with the
/// same probability `p = (n / d) * f_avg * (m - 1)`.
pub fn conflict_items_random(
    fractions: &[f64],
    threads: u32,
    layout: &DataLayout,
) -> Result<Vec<f64>> {
    let f_avg = avg_fraction(fractions)?;
    if fractions.len() != layout.operations() {
        return Err(ModelError::LengthMismatch {
            left: fractions.len(),
            right: layout.operations(),
        });
    }
    if layout.operations() > layout.items() {
        return Err(ModelError::SampleExceedsPopulation {
            n: layout.operations(),
            d: layout.items(),
        });
    }
    let peers = threads.saturating_sub(1) as f64;
    let p = layout.operations() as f64 / layout.items() as f64 * f_avg * peers;
    Ok(vec![p; layout.operations()])
}

/// Exact pmf of the item rank touched at each operation under sorted access.
///
/// The item at operation `i` is the i-th smallest of `n` items drawn without
/// replacement from `d`, so
/// `P[i][x] = C(x-1, i-1) * C(d-x, n-i) / C(d, n)` (1-based `i`, `x`).
/// Binomials are evaluated in the log domain from a compensated
/// log-factorial table, which keeps the computation stable for item counts
/// far beyond anything a direct product could represent. Rows whose sums
/// drift from 1 by more than [`PMF_DRIFT_LIMIT`] are renormalized and the
/// drift is reported on the returned [`AccessPmf`].
pub fn order_stat_pmf(layout: &DataLayout) -> Result<AccessPmf> {
    let d = layout.items();
    let n = layout.operations();
    if n > d {
        return Err(ModelError::SampleExceedsPopulation { n, d });
    }
    let lnfact = ln_factorials(d);
    let ln_choose = |a: usize, b: usize| -> f64 { lnfact[a] - lnfact[b] - lnfact[a - b] };
    let ln_total = ln_choose(d, n);

    let mut probs = vec![0.0; n * d];
    for i in 1..=n {
        let row = &mut probs[(i - 1) * d..i * d];
        // Item rank x is feasible only with i-1 smaller and n-i larger items available.
        for x in i..=(d - n + i) {
            let ln_p = ln_choose(x - 1, i - 1) + ln_choose(d - x, n - i) - ln_total;
            row[x - 1] = ln_p.exp();
        }
    }
    Ok(AccessPmf::from_rows(n, d, probs))
}

/// Brute-force oracle for [`order_stat_pmf`]: enumerates every ascending
/// `n`-subset of `1..=d`, tallies which rank lands on which item, and divides
/// by the exact subset count. Refuses layouts needing more than
/// [`ENUMERATION_CAP`] subsets.
pub fn order_stat_pmf_oracle(layout: &DataLayout) -> Result<AccessPmf> {
    let d = layout.items();
    let n = layout.operations();
    if n > d {
        return Err(ModelError::SampleExceedsPopulation { n, d });
    }
    let total = binomial_exact(d, n);
    if total > ENUMERATION_CAP as u128 {
        return Err(ModelError::EnumerationCapExceeded {
            d,
            n,
            combinations: total,
            cap: ENUMERATION_CAP,
        });
    }

    let mut tallies = vec![0u64; n * d];
    // Lexicographic walk over ascending index tuples; each tuple is already
    // the sorted access sequence.
    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        for (rank, &item) in combo.iter().enumerate() {
            tallies[rank * d + item] += 1;
        }
        // Advance to the next combination.
        let mut pos = n;
        loop {
            if pos == 0 {
                let probs = tallies
                    .iter()
                    .map(|&c| c as f64 / total as f64)
                    .collect::<Vec<_>>();
                return Ok(AccessPmf::from_rows(n, d, probs));
            }
            pos -= 1;
            if combo[pos] != pos + d - n {
                break;
            }
        }
        combo[pos] += 1;
        for j in pos + 1..n {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Sorted random access over one table. The fraction of time item `x` stays
/// locked by a peer is the pmf-weighted mix of the per-operation fractions,
/// and the conflict at operation `i` weights those by where `i` lands:
/// `p_i = (m - 1) * Σ_x P[i][x] * Σ_k P[k][x] * f_k`.
pub fn conflict_items_sorted(fractions: &[f64], threads: u32, pmf: &AccessPmf) -> Result<Vec<f64>> {
    let n = pmf.operations();
    let d = pmf.items();
    if fractions.len() != n {
        return Err(ModelError::PmfShapeMismatch {
            rows: n,
            cols: d,
            n: fractions.len(),
            d,
        });
    }
    let mut item_fraction = vec![0.0f64; d];
    for (k, &f_k) in fractions.iter().enumerate() {
        if f_k == 0.0 {
            continue;
        }
        for (slot, &p) in item_fraction.iter_mut().zip(pmf.row(k)) {
            *slot += p * f_k;
        }
    }
    let peers = threads.saturating_sub(1) as f64;
    Ok((0..n)
        .map(|i| {
            let row = pmf.row(i);
            let weighted: f64 = row.iter().zip(&item_fraction).map(|(p, f)| p * f).sum();
            peers * weighted
        })
        .collect())
}

/// Compensated (Kahan) prefix sums of `ln k`, so `table[k] = ln(k!)`.
fn ln_factorials(upto: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(upto + 1);
    table.push(0.0);
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for k in 1..=upto {
        let term = (k as f64).ln() - carry;
        let next = sum + term;
        carry = (next - sum) - term;
        sum = next;
        table.push(sum);
    }
    table
}

/// Exact binomial coefficient in wide integer arithmetic; saturates above
/// `u128::MAX / 2` which is far past every cap used here.
fn binomial_exact(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for j in 0..k {
        result = result.saturating_mul((n - j) as u128) / (j + 1) as u128;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(d: usize, n: usize) -> DataLayout {
        DataLayout::new(d, n).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn same_order_single_thread_never_conflicts() {
        let p = conflict_tables_same_order(&[0.9, 0.4], 1, 10).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn same_order_example() {
        let p = conflict_tables_same_order(&[0.5, 0.25], 3, 10).unwrap();
        assert!(max_abs_diff(&p, &[0.1, 0.05]) < 1e-15);
    }

    #[test]
    fn same_order_boundary_can_reach_one() {
        // Candidates may hit 1; clamping is the solver's responsibility.
        let p = conflict_tables_same_order(&[1.0, 1.0], 2, 1).unwrap();
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn mixed_order_reduces_to_same_order() {
        let f = [0.5, 0.25];
        let mixed = conflict_tables_mixed_order(&f, &f, 3, 0, 10).unwrap();
        let same = conflict_tables_same_order(&f, 3, 10).unwrap();
        assert_eq!(mixed, same);
    }

    #[test]
    fn mixed_order_example() {
        let f = [0.4, 0.2];
        let p = conflict_tables_mixed_order(&f, &f, 2, 2, 5).unwrap();
        assert!((p[0] - 0.16).abs() < 1e-15);
        assert!((p[1] - 0.20).abs() < 1e-15);
    }

    #[test]
    fn mixed_order_symmetric_fractions_give_equal_classes() {
        // A palindromic fraction vector makes both classes indistinguishable.
        let f = [0.3, 0.3];
        let a = conflict_tables_mixed_order(&f, &f, 4, 4, 6).unwrap();
        let b = conflict_tables_mixed_order(&f, &f, 4, 4, 6).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - a[1]).abs() < 1e-15);
    }

    #[test]
    fn mixed_order_rejects_shape_errors() {
        assert!(matches!(
            conflict_tables_mixed_order(&[0.1], &[0.1, 0.2], 1, 1, 5),
            Err(ModelError::LengthMismatch { .. })
        ));
        assert!(matches!(
            conflict_tables_mixed_order(&[0.1], &[0.1], 1, 1, 0),
            Err(ModelError::ZeroSubsetSize)
        ));
    }

    #[test]
    fn avg_fraction_examples() {
        assert!((avg_fraction(&[0.7, 0.7, 0.7]).unwrap() - 0.7).abs() < 1e-15);
        let mean = avg_fraction(&[2.0 / 3.0, 1.0 / 6.0]).unwrap();
        assert!((mean - 5.0 / 12.0).abs() < 1e-15);
        assert!((avg_fraction(&[1.0, 1e-12]).unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(avg_fraction(&[]), Err(ModelError::Empty { .. })));
    }

    #[test]
    fn items_random_examples() {
        let lay = layout(100, 4);
        let p = conflict_items_random(&[0.2, 0.2, 0.2, 0.2], 1, &lay).unwrap();
        assert_eq!(p, vec![0.0; 4]);

        let p = conflict_items_random(&[0.5, 0.5, 0.5, 0.5], 5, &lay).unwrap();
        for v in &p {
            assert!((v - 0.08).abs() < 1e-15);
        }

        let lay = layout(3, 3);
        let phi = 0.37;
        let p = conflict_items_random(&[phi, phi, phi], 2, &lay).unwrap();
        for v in &p {
            assert!((v - phi).abs() < 1e-15);
        }
    }

    #[test]
    fn items_random_rejects_oversized_sample() {
        let lay = layout(3, 5);
        assert!(matches!(
            conflict_items_random(&[0.1; 5], 2, &lay),
            Err(ModelError::SampleExceedsPopulation { n: 5, d: 3 })
        ));
    }

    #[test]
    fn pmf_whole_set_is_identity() {
        let pmf = order_stat_pmf(&layout(3, 3)).unwrap();
        for i in 0..3 {
            for x in 0..3 {
                let expected = if i == x { 1.0 } else { 0.0 };
                assert!((pmf.prob(i, x) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pmf_four_choose_two() {
        // All six 2-subsets of 4 items, tallied by hand.
        let pmf = order_stat_pmf(&layout(4, 2)).unwrap();
        let expect0 = [0.5, 1.0 / 3.0, 1.0 / 6.0, 0.0];
        let expect1 = [0.0, 1.0 / 6.0, 1.0 / 3.0, 0.5];
        assert!(max_abs_diff(pmf.row(0), &expect0) < 1e-14);
        assert!(max_abs_diff(pmf.row(1), &expect1) < 1e-14);
    }

    #[test]
    fn pmf_rejects_oversized_sample() {
        assert!(matches!(
            order_stat_pmf(&layout(3, 4)),
            Err(ModelError::SampleExceedsPopulation { .. })
        ));
    }

    #[test]
    fn oracle_matches_closed_form_exactly_small() {
        let closed = order_stat_pmf(&layout(4, 2)).unwrap();
        let oracle = order_stat_pmf_oracle(&layout(4, 2)).unwrap();
        assert!(max_abs_diff(&closed.probs, &oracle.probs) < 1e-15);

        let single = order_stat_pmf_oracle(&layout(1, 1)).unwrap();
        assert_eq!(single.to_rows(), vec![vec![1.0]]);
    }

    #[test]
    fn oracle_matches_at_twelve_choose_six() {
        let lay = layout(12, 6);
        let closed = order_stat_pmf(&lay).unwrap();
        let oracle = order_stat_pmf_oracle(&lay).unwrap();
        assert!(max_abs_diff(&closed.probs, &oracle.probs) <= 1e-12);
    }

    #[test]
    fn oracle_honours_cap() {
        let lay = layout(60, 30);
        assert!(matches!(
            order_stat_pmf_oracle(&lay),
            Err(ModelError::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn sorted_single_thread_never_conflicts() {
        let pmf = order_stat_pmf(&layout(6, 2)).unwrap();
        let p = conflict_items_sorted(&[0.8, 0.3], 1, &pmf).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn sorted_identity_pmf_collapses_to_fractions() {
        let pmf = order_stat_pmf(&layout(5, 5)).unwrap();
        let f = [0.9, 0.7, 0.5, 0.3, 0.1];
        let p = conflict_items_sorted(&f, 4, &pmf).unwrap();
        for (pi, fi) in p.iter().zip(&f) {
            assert!((pi - 3.0 * fi).abs() <= 1e-12);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn sorted_matches_independent_matrix_evaluation() {
        // p = (m-1) * P (P^T f), evaluated here with explicit nested loops.
        let lay = layout(4, 2);
        let pmf = order_stat_pmf(&lay).unwrap();
        let f = [0.6, 0.3];
        let threads = 2u32;
        let p = conflict_items_sorted(&f, threads, &pmf).unwrap();

        let n = 2;
        let d = 4;
        let mut pt_f = vec![0.0f64; d];
        for x in 0..d {
            for k in 0..n {
                pt_f[x] += pmf.prob(k, x) * f[k];
            }
        }
        let mut expected = vec![0.0f64; n];
        for i in 0..n {
            for x in 0..d {
                expected[i] += pmf.prob(i, x) * pt_f[x];
            }
            expected[i] *= (threads - 1) as f64;
        }
        assert!(max_abs_diff(&p, &expected) < 1e-15);
    }

    #[test]
    fn sorted_rejects_shape_mismatch() {
        let pmf = order_stat_pmf(&layout(4, 2)).unwrap();
        assert!(matches!(
            conflict_items_sorted(&[0.1, 0.2, 0.3], 2, &pmf),
            Err(ModelError::PmfShapeMismatch { .. })
        ));
    }

    #[test]
    fn layout_validation() {
        assert!(matches!(
            DataLayout::new(0, 1),
            Err(ModelError::EmptyDataSet)
        ));
        assert!(matches!(
            DataLayout::new(1, 0),
            Err(ModelError::NoOperations)
        ));
        assert_eq!(layout(10, 2).subset_size(), Some(5));
        assert_eq!(layout(10, 3).subset_size(), None);
    }

    proptest! {
        #[test]
        fn mixed_order_with_no_opposite_class_reduces_exactly(
            f in proptest::collection::vec(0.01..1.0f64, 1..=10),
            threads in 1u32..20,
            s in 1usize..50,
        ) {
            let mixed = conflict_tables_mixed_order(&f, &f, threads, 0, s).unwrap();
            let same = conflict_tables_same_order(&f, threads, s).unwrap();
            prop_assert_eq!(mixed, same);
        }

        #[test]
        fn pmf_reflection_symmetry(d in 1usize..40, n_seed in 1usize..40) {
            let n = 1 + n_seed % d;
            let pmf = order_stat_pmf(&layout(d, n)).unwrap();
            for i in 0..n {
                for x in 0..d {
                    let mirrored = pmf.prob(n - 1 - i, d - 1 - x);
                    prop_assert!((pmf.prob(i, x) - mirrored).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn pmf_rows_sum_to_one(d in 1usize..60, n_seed in 1usize..60) {
            let n = 1 + n_seed % d;
            let pmf = order_stat_pmf(&layout(d, n)).unwrap();
            for i in 0..n {
                let sum: f64 = pmf.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn pmf_column_mass_is_sampling_rate(d in 1usize..50, n_seed in 1usize..50) {
            let n = 1 + n_seed % d;
            let pmf = order_stat_pmf(&layout(d, n)).unwrap();
            let rate = n as f64 / d as f64;
            for x in 0..d {
                let col: f64 = (0..n).map(|i| pmf.prob(i, x)).sum();
                prop_assert!((col - rate).abs() <= 1e-9);
            }
        }

        #[test]
        fn conflicts_scale_linearly_in_peer_count(
            f in proptest::collection::vec(0.01..1.0f64, 2..=6),
            base in 2u32..12,
            s in 1usize..40,
        ) {
            // Doubling m - 1 must double every estimate.
            let doubled = 2 * base - 1;
            let n = f.len();

            let p1 = conflict_tables_same_order(&f, base, s).unwrap();
            let p2 = conflict_tables_same_order(&f, doubled, s).unwrap();
            for i in 0..n {
                prop_assert!((p2[i] - 2.0 * p1[i]).abs() <= 1e-12 * p2[i].max(1.0));
            }

            let lay = layout(n * 8, n);
            let q1 = conflict_items_random(&f, base, &lay).unwrap();
            let q2 = conflict_items_random(&f, doubled, &lay).unwrap();
            for i in 0..n {
                prop_assert!((q2[i] - 2.0 * q1[i]).abs() <= 1e-12 * q2[i].max(1.0));
            }

            let pmf = order_stat_pmf(&lay).unwrap();
            let r1 = conflict_items_sorted(&f, base, &pmf).unwrap();
            let r2 = conflict_items_sorted(&f, doubled, &pmf).unwrap();
            for i in 0..n {
                prop_assert!((r2[i] - 2.0 * r1[i]).abs() <= 1e-12 * r2[i].max(1.0));
            }
        }

        #[test]
        fn oracle_equals_closed_form_for_all_small_layouts(d in 1usize..=12) {
            for n in 1..=d {
                let lay = layout(d, n);
                let closed = order_stat_pmf(&lay).unwrap();
                let oracle = order_stat_pmf_oracle(&lay).unwrap();
                prop_assert!(max_abs_diff(&closed.probs, &oracle.probs) <= 1e-12);
            }
        }
    }
}
