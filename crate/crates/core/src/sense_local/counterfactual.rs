//! Propagating sensitivities through counterfactual experiments.
//!
//! With `θ̃ = H(θ̂(γ))` the chain rule gives
//! `∂θ̃/∂γ' = (∂H/∂θ')(∂θ/∂γ')`, and the counterfactual value function
//! `Ṽ = F̃(θ̃, Ṽ; γ)` adds one linear solve:
//! `(∂F̃/∂V' − I) ∂Ṽ/∂γ' = −∂F̃/∂γ' − (∂F̃/∂θ') ∂θ̃/∂γ'`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::lu_solve_matrix;

use super::system::SensitivityReport;

/// Counterfactual Jacobians with respect to the fixed parameters.
#[derive(Clone, Debug)]
pub struct CounterfactualSensitivity {
    pub dtheta_tilde_dgamma: DMatrix<f64>,
    pub dv_tilde_dgamma: DMatrix<f64>,
}

/// Computes counterfactual sensitivities from the baseline report and
/// the constraint Jacobians evaluated at the counterfactual solution
/// `(θ̃, Ṽ; γ)`.
pub fn counterfactual_sensitivity(
    report: &SensitivityReport,
    h_jacobian: &DMatrix<f64>,
    f_tilde_theta: &DMatrix<f64>,
    f_tilde_v: &DMatrix<f64>,
    f_tilde_gamma: &DMatrix<f64>,
) -> Result<CounterfactualSensitivity> {
    let dt = report.dtheta_dgamma.nrows();
    if h_jacobian.ncols() != dt {
        return Err(Error::Dimension {
            what: "counterfactual transform Jacobian",
            expected: dt,
            found: h_jacobian.ncols(),
        });
    }
    let d_tilde_v = f_tilde_v.nrows();
    if f_tilde_theta.nrows() != d_tilde_v || f_tilde_gamma.nrows() != d_tilde_v {
        return Err(Error::Dimension {
            what: "counterfactual constraint blocks",
            expected: d_tilde_v,
            found: f_tilde_theta.nrows(),
        });
    }

    let dtheta_tilde = h_jacobian * &report.dtheta_dgamma;
    let eye = DMatrix::<f64>::identity(d_tilde_v, d_tilde_v);
    let lhs = f_tilde_v - &eye;
    let rhs = -(f_tilde_gamma + f_tilde_theta * &dtheta_tilde);
    let dv_tilde = lu_solve_matrix(&lhs, &rhs, "counterfactual value sensitivity")?;

    Ok(CounterfactualSensitivity {
        dtheta_tilde_dgamma: dtheta_tilde,
        dv_tilde_dgamma: dv_tilde,
    })
}
