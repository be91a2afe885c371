//! Time-ordered event dispatch.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// What a pending event means for its thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// The residence time of operation `op` (0-based) has elapsed; the thread
    /// now attempts the lock.
    OperationDone { op: usize },
    /// The commit residence has elapsed; the thread releases everything.
    CommitDone,
}

/// A dispatched event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time_us: f64,
    pub thread: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    time_us: f64,
    seq: u64,
    thread: usize,
    kind: EventKind,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_us
            .total_cmp(&other.time_us)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

/// Min-heap of pending events ordered by timestamp, with insertion order as
/// the deterministic tie-break.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time_us: f64, thread: usize, kind: EventKind) {
        assert!(time_us.is_finite(), "event time must be finite");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Queued {
            time_us,
            seq,
            thread,
            kind,
        }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(q)| Event {
            time_us: q.time_us,
            thread: q.thread,
            kind: q.kind,
        })
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
