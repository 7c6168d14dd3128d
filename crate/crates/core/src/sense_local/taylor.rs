//! First-order approximation of targets at nearby fixed parameters, and
//! its error against a re-estimation oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// `θ(γ) + (∂θ/∂γ') Δγ`.
pub fn taylor_approximate(
    theta_at_gamma: &DVector<f64>,
    dtheta_dgamma: &DMatrix<f64>,
    delta_gamma: &DVector<f64>,
) -> DVector<f64> {
    theta_at_gamma + dtheta_dgamma * delta_gamma
}

/// One row of the approximation-error table for a scalar target.
#[derive(Clone, Copy, Debug)]
pub struct ApproximationErrorRow {
    /// Step `Δγ`; the approximation targets `γ' = γ − Δγ`.
    pub delta: f64,
    pub approximation: f64,
    /// Re-estimated target at `γ'`.
    pub truth: f64,
    /// Signed percentage error, `100 · (approx − truth) / truth`.
    pub percent_error: f64,
}

/// Approximates a scalar target at `γ' = γ − Δγ` for each step and
/// compares with the supplied re-estimation oracle.
pub fn approximation_error_table(
    value: f64,
    derivative: f64,
    gamma: f64,
    deltas: &[f64],
    mut oracle: impl FnMut(f64) -> Result<f64>,
) -> Result<Vec<ApproximationErrorRow>> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let target_gamma = gamma - delta;
        let approximation = value - derivative * delta;
        let truth = oracle(target_gamma)?;
        let percent_error = if truth == 0.0 {
            f64::NAN
        } else {
            100.0 * (approximation - truth) / truth
        };
        rows.push(ApproximationErrorRow {
            delta,
            approximation,
            truth,
            percent_error,
        });
    }
    Ok(rows)
}
