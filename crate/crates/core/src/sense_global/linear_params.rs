//! Discount-factor and calibrated-coefficient derivatives of the
//! two-step minimum-distance estimator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimate::LinearUtilitySpec;
use crate::linalg::lu_solve;

/// `∂θ̂/∂β = (Π'WΠ)⁻¹ Π'W ∂π̂/∂β`: the weighted least-squares projection
/// of the utility derivative.
pub fn theta_beta_derivative(
    spec: &LinearUtilitySpec,
    dpi_dbeta: &DVector<f64>,
) -> Result<DVector<f64>> {
    if dpi_dbeta.len() != spec.pi().nrows() {
        return Err(Error::Dimension {
            what: "stacked utility derivative",
            expected: spec.pi().nrows(),
            found: dpi_dbeta.len(),
        });
    }
    let lhs = spec.normal_matrix();
    let rhs = spec.pi().transpose() * spec.w() * dpi_dbeta;
    lu_solve(&lhs, &rhs, "theta beta derivative")
}

/// Derivative of `θ̂` with respect to a calibrated scalar `δ` entering
/// the coefficient matrix. Product rule on `θ̂ = (Π'WΠ)⁻¹Π'Wπ̂`:
///
/// `∂θ̂/∂δ = −(Π'WΠ)⁻¹ [(∂Π/∂δ)'W(Πθ̂ − π̂) + Π'W(∂Π/∂δ)θ̂]`.
///
/// When the cross-product `(∂Π/∂δ)'WΠ` happens to be symmetric the
/// bracket collapses to `Π'(W'+W)(∂Π/∂δ)θ̂ − (∂Π/∂δ)'Wπ̂`; the general
/// form here is what finite differences of the re-estimated `θ̂(δ)`
/// reproduce.
pub fn theta_delta_derivative(
    spec: &LinearUtilitySpec,
    dpi_matrix_ddelta: &DMatrix<f64>,
    theta_hat: &DVector<f64>,
    pi_hat: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (rows, cols) = (spec.pi().nrows(), spec.pi().ncols());
    if dpi_matrix_ddelta.nrows() != rows || dpi_matrix_ddelta.ncols() != cols {
        return Err(Error::Dimension {
            what: "coefficient-matrix derivative",
            expected: rows,
            found: dpi_matrix_ddelta.nrows(),
        });
    }
    if theta_hat.len() != cols || pi_hat.len() != rows {
        return Err(Error::Dimension {
            what: "theta_hat / pi_hat",
            expected: cols,
            found: theta_hat.len(),
        });
    }
    let fitted_residual = spec.pi() * theta_hat - pi_hat;
    let bracket = dpi_matrix_ddelta.transpose() * spec.w() * fitted_residual
        + spec.pi().transpose() * spec.w() * dpi_matrix_ddelta * theta_hat;
    let lhs = spec.normal_matrix();
    let sol = lu_solve(&lhs, &bracket, "theta delta derivative")?;
    Ok(-sol)
}
