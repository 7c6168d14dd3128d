//! Elasticity and semi-elasticity rescalings of the sensitivity Jacobian.
//!
//! Entries whose defining denominators are zero are flagged as undefined
//! rather than emitted as NaN; flagged entries serialize to JSON `null`.

use nalgebra::DVector;
use serde_json::Value;

use super::system::SensitivityReport;

/// Exact-zero semantics for the denominators.
const ZERO_THRESHOLD: f64 = 1e-300;

/// A table with undefined-flagged entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FlaggedTable {
    rows: usize,
    cols: usize,
    entries: Vec<Option<f64>>,
}

impl FlaggedTable {
    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Option<f64>) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.cols + j]
    }

    /// Nested JSON array with `null` for flagged entries.
    pub fn to_json_value(&self) -> Value {
        Value::Array(
            (0..self.rows)
                .map(|i| {
                    Value::Array(
                        (0..self.cols)
                            .map(|j| match self.get(i, j) {
                                Some(v) => serde_json::json!(v),
                                None => Value::Null,
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// Elasticity table: `(∂θ_i/∂γ_j)(γ_j/θ_i)`, undefined when either
/// `θ_i` or `γ_j` is zero.
pub fn elasticity(
    report: &SensitivityReport,
    theta_hat: &DVector<f64>,
    gamma: &[f64],
) -> FlaggedTable {
    FlaggedTable::from_fn(theta_hat.len(), gamma.len(), |i, j| {
        if theta_hat[i].abs() <= ZERO_THRESHOLD || gamma[j].abs() <= ZERO_THRESHOLD {
            None
        } else {
            Some(report.dtheta_dgamma[(i, j)] * gamma[j] / theta_hat[i])
        }
    })
}

/// Semi-elasticity table: `(∂θ_i/∂γ_j)·γ_j`, undefined when `γ_j` is
/// zero.
pub fn semi_elasticity(report: &SensitivityReport, gamma: &[f64]) -> FlaggedTable {
    FlaggedTable::from_fn(report.dtheta_dgamma.nrows(), gamma.len(), |i, j| {
        if gamma[j].abs() <= ZERO_THRESHOLD {
            None
        } else {
            Some(report.dtheta_dgamma[(i, j)] * gamma[j])
        }
    })
}

/// Scalar elasticity for a single target, same conventions.
pub fn scalar_elasticity(derivative: f64, value: f64, gamma: f64) -> Option<f64> {
    if value.abs() <= ZERO_THRESHOLD || gamma.abs() <= ZERO_THRESHOLD {
        None
    } else {
        Some(derivative * gamma / value)
    }
}
