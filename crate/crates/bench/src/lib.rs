//! Shared workload builders for the benchmark targets.

use lockmodel_core::{DataLayout, OperationProfile, PatternCase, WorkloadSpec};

/// Desk-scale reference workload: 1024 items, 8 operations of 10 µs each,
/// 10 µs commit.
pub fn desk_spec(pattern: PatternCase, threads: u32) -> WorkloadSpec {
    WorkloadSpec::new(
        threads,
        DataLayout::new(1024, 8).unwrap(),
        OperationProfile::uniform(8, 10.0, 10.0).unwrap(),
        pattern,
    )
}

/// One representative of each access pattern, with an even split for the
/// mixed-order case.
pub fn all_patterns(threads: u32) -> [PatternCase; 4] {
    [
        PatternCase::TablesMixedOrder {
            forward_threads: threads / 2,
            reverse_threads: threads - threads / 2,
        },
        PatternCase::TablesSameOrder,
        PatternCase::ItemsRandom,
        PatternCase::ItemsSorted,
    ]
}
