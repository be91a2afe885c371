//! Absorbing-chain arithmetic for the abort-and-restart transaction model.
//!
//! A transaction with `n` lock-acquiring operations is a linear chain of
//! transient states `O_1 … O_n` followed by one absorbing commit state. A
//! conflict at `O_i` (probability `p_i`) sends the transaction back to `O_1`;
//! otherwise it advances. This module computes expected visit counts, the mean
//! response time, per-operation lock holding times, and holding-time fractions.

use serde::Serialize;

use crate::error::{ModelError, Result};

/// Largest chain the explicit matrix-inversion oracle accepts.
pub const REFERENCE_DIM_CAP: usize = 64;

/// Relative slack allowed when checking holding times against the response
/// time; absorbs summation-order rounding when the inputs were computed by
/// separate passes over the same data.
const HOLDING_SLACK: f64 = 1e-9;

/// Per-operation conflict probabilities, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictVector(Vec<f64>);

impl ConflictVector {
    /// Validates that every entry is a probability strictly below 1. Entries
    /// at or above 1 have no stationary visit count and are rejected.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(ModelError::Empty {
                what: "conflict vector",
            });
        }
        for (index, &value) in probabilities.iter().enumerate() {
            if !(0.0..1.0).contains(&value) || !value.is_finite() {
                return Err(ModelError::InvalidConflictProbability { index, value });
            }
        }
        Ok(Self(probabilities))
    }

    /// All-zero conflict vector of length `n`.
    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// State residence times: one duration per operation plus the commit duration,
/// all in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationProfile {
    residence_us: Vec<f64>,
    commit_us: f64,
}

impl OperationProfile {
    /// All durations must be finite and non-negative, and at least one of
    /// them strictly positive (a transaction that takes no time at all has no
    /// measurable response).
    pub fn new(residence_us: Vec<f64>, commit_us: f64) -> Result<Self> {
        if residence_us.is_empty() {
            return Err(ModelError::Empty {
                what: "residence-time vector",
            });
        }
        for (index, &value) in residence_us.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidDuration {
                    what: "residence time",
                    index,
                    value,
                });
            }
        }
        if !commit_us.is_finite() || commit_us < 0.0 {
            return Err(ModelError::InvalidDuration {
                what: "commit time",
                index: 0,
                value: commit_us,
            });
        }
        if commit_us == 0.0 && residence_us.iter().all(|&t| t == 0.0) {
            return Err(ModelError::AllZeroDurations);
        }
        Ok(Self {
            residence_us,
            commit_us,
        })
    }

    /// Uniform profile: every operation takes `each_us`, commit takes `commit_us`.
    pub fn uniform(operations: usize, each_us: f64, commit_us: f64) -> Result<Self> {
        Self::new(vec![each_us; operations], commit_us)
    }

    pub fn len(&self) -> usize {
        self.residence_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residence_us.is_empty()
    }

    pub fn residence_us(&self) -> &[f64] {
        &self.residence_us
    }

    pub fn commit_us(&self) -> f64 {
        self.commit_us
    }

    /// Conflict-free response time: the sum of all residences plus commit.
    pub fn base_response_us(&self) -> f64 {
        self.residence_us.iter().sum::<f64>() + self.commit_us
    }
}

/// Expected number of visits to each operation state before absorption,
/// starting from the first operation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitCounts(Vec<f64>);

impl VisitCounts {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Derived lock metrics for one thread class: holding times, holding
/// fractions, and the mean response time they were normalized by.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockProfile {
    pub holding_us: Vec<f64>,
    pub fractions: Vec<f64>,
    pub response_us: f64,
}

impl LockProfile {
    /// Runs the full per-iteration chain: visit counts are taken as given,
    /// response time, holding times, and fractions are derived from them.
    pub fn derive(visits: &VisitCounts, profile: &OperationProfile) -> Result<Self> {
        let response_us = response_time(visits, profile)?;
        let holding_us = lock_holding_times(visits, profile)?;
        let fractions = lock_fractions(&holding_us, response_us)?;
        Ok(Self {
            holding_us,
            fractions,
            response_us,
        })
    }
}

/// Expected visits to each operation state before commit.
///
/// The closed form is `N_i = 1 / Π_{k=i..n} (1 - p_k)`, evaluated as a
/// backward running product in O(n).
pub fn visit_counts(conflict: &ConflictVector) -> VisitCounts {
    let p = conflict.as_slice();
    let mut counts = vec![0.0; p.len()];
    let mut survive = 1.0;
    for i in (0..p.len()).rev() {
        survive *= 1.0 - p[i];
        counts[i] = 1.0 / survive;
    }
    VisitCounts(counts)
}

/// Matrix-inversion oracle for [`visit_counts`] with the default size cap.
pub fn visit_counts_reference(conflict: &ConflictVector) -> Result<VisitCounts> {
    visit_counts_reference_with_cap(conflict, REFERENCE_DIM_CAP)
}

/// Matrix-inversion oracle for [`visit_counts`].
///
/// Builds the explicit transient transition matrix (first column the conflict
/// probabilities, superdiagonal the advance probabilities), inverts `I - Q` by
/// Gauss-Jordan elimination with partial pivoting, and returns its first row.
/// Kept deliberately independent of the closed form so the two can check each
/// other. The cap guards against accidental O(n^3) blowups; this is a checking
/// tool, not a production path.
pub fn visit_counts_reference_with_cap(
    conflict: &ConflictVector,
    cap: usize,
) -> Result<VisitCounts> {
    let p = conflict.as_slice();
    let n = p.len();
    if n > cap {
        return Err(ModelError::DimensionCapExceeded { n, cap });
    }

    // a = I - Q
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] += 1.0;
        a[i][0] -= p[i];
        if i + 1 < n {
            a[i][i + 1] -= 1.0 - p[i];
        }
    }
    let inverse = invert(a).ok_or(ModelError::SingularSystem)?;
    Ok(VisitCounts(inverse[0].clone()))
}

fn invert(a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut x = gauss_jordan(a.clone())?;
    // Newton refinement, X <- X + X(I - AX). The residual is accumulated with
    // error-free transformations (FMA product error plus two-sum carries)
    // because its terms can be six orders of magnitude larger than the
    // residual itself; a naive dot product would lose exactly the digits the
    // refinement is meant to recover.
    for _ in 0..2 {
        let mut residual = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut sum = if i == j { -1.0 } else { 0.0 };
                let mut carry = 0.0;
                for k in 0..n {
                    let prod = a[i][k] * x[k][j];
                    let prod_err = a[i][k].mul_add(x[k][j], -prod);
                    let s = sum + prod;
                    let shifted = s - sum;
                    carry += (sum - (s - shifted)) + (prod - shifted) + prod_err;
                    sum = s;
                }
                residual[i][j] = -(sum + carry);
            }
        }
        let mut refined = x.clone();
        for i in 0..n {
            for j in 0..n {
                let mut correction = 0.0;
                for k in 0..n {
                    correction += x[i][k] * residual[k][j];
                }
                refined[i][j] += correction;
            }
        }
        x = refined;
    }
    Some(x)
}

fn gauss_jordan(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = a[col][col];
        for j in 0..n {
            a[col][j] /= pivot;
            inv[col][j] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[row][j] -= factor * a[col][j];
                inv[row][j] -= factor * inv[col][j];
            }
        }
    }
    Some(inv)
}

/// Mean transaction response time: the visit-weighted residence times plus
/// the commit duration.
pub fn response_time(visits: &VisitCounts, profile: &OperationProfile) -> Result<f64> {
    if visits.len() != profile.len() {
        return Err(ModelError::LengthMismatch {
            left: visits.len(),
            right: profile.len(),
        });
    }
    let dot: f64 = visits
        .as_slice()
        .iter()
        .zip(profile.residence_us())
        .map(|(n, t)| n * t)
        .sum();
    Ok(dot + profile.commit_us())
}

/// Mean time the lock acquired at each operation stays held, summed across
/// all retries: everything the transaction spends in later operation states
/// plus the commit duration.
pub fn lock_holding_times(visits: &VisitCounts, profile: &OperationProfile) -> Result<Vec<f64>> {
    if visits.len() != profile.len() {
        return Err(ModelError::LengthMismatch {
            left: visits.len(),
            right: profile.len(),
        });
    }
    let n = visits.len();
    let counts = visits.as_slice();
    let residence = profile.residence_us();
    let mut holding = vec![0.0; n];
    let mut suffix = 0.0;
    for i in (0..n).rev() {
        holding[i] = suffix + profile.commit_us();
        suffix += counts[i] * residence[i];
    }
    Ok(holding)
}

/// Holding-time fractions `f_i = l_i / R`.
///
/// A holding time may exceed the response time only through rounding in
/// independently accumulated sums; within a 1e-9 relative slack the fraction
/// is clamped to 1, beyond it the inputs are inconsistent.
pub fn lock_fractions(holding_us: &[f64], response_us: f64) -> Result<Vec<f64>> {
    if !response_us.is_finite() || response_us <= 0.0 {
        return Err(ModelError::NonPositiveResponseTime { value: response_us });
    }
    let mut fractions = Vec::with_capacity(holding_us.len());
    for (index, &holding) in holding_us.iter().enumerate() {
        if holding > response_us * (1.0 + HOLDING_SLACK) {
            return Err(ModelError::HoldingExceedsResponse {
                index,
                holding,
                response: response_us,
            });
        }
        fractions.push((holding / response_us).min(1.0));
    }
    Ok(fractions)
}
