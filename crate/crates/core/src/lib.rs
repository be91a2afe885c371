//! Contention modelling for transactions under encounter-time two-phase
//! locking with abort on conflict and immediate restart.
//!
//! The crate has two halves that check each other:
//!
//! * an analytical side ([`chain`], [`patterns`], [`solver`]) that predicts
//!   mean response times and per-operation conflict probabilities from the
//!   data-access pattern, by iterating an absorbing-chain model of the
//!   transaction to a fixed point, and
//! * an empirical side ([`sim`]) that replays the same locking discipline in
//!   a deterministic discrete-event simulation and measures the corresponding
//!   quantities directly.
//!
//! Four access patterns are supported: disjoint tables walked in one shared
//! order or in two opposite orders, and single-table access with the items
//! kept in draw order or pre-sorted ascending.

pub mod chain;
pub mod error;
pub mod patterns;
pub mod sim;
pub mod solver;

pub use chain::{
    lock_fractions, lock_holding_times, response_time, visit_counts, visit_counts_reference,
    visit_counts_reference_with_cap, ConflictVector, LockProfile, OperationProfile, VisitCounts,
};
pub use error::{ModelError, Result, Violation};
pub use patterns::{
    avg_fraction, conflict_items_random, conflict_items_sorted, conflict_tables_mixed_order,
    conflict_tables_same_order, order_stat_pmf, order_stat_pmf_oracle, AccessPmf, DataLayout,
    PatternCase,
};
pub use sim::{
    empirical_lock_fractions, simulate, simulate_with_trace, ClassSimResult, CommitRecord,
    LockEvent, LockEventKind, SimOptions, SimResult, PRNG_ALGORITHM,
};
pub use solver::{
    iterate_model, solve, validate_spec, ClassSolution, IterationStep, ModelSolution,
    SolverOptions, ThreadClass, WorkloadSpec,
};
