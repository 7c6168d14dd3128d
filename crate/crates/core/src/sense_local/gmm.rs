//! Sensitivity of GMM estimates to fixed parameters.
//!
//! For `min_θ g(θ;γ)'W g(θ;γ)` the substituted Hessian blocks are
//!
//! `∂²L̄/∂θ∂θ' = G'WG + (g'W ⊗ I) ∂vec[G']/∂θ'`
//! `∂²L̄/∂θ∂γ' = G'WG_γ + (g'W ⊗ I) ∂vec[G']/∂γ'`
//!
//! with `G = ∂g/∂θ'`; the Kronecker terms vanish for moments linear
//! in θ. Feeding these blocks into the unconstrained solve gives the
//! GMM local sensitivity measure.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::system::unconstrained_sensitivity;

/// Moment values and Jacobians at the GMM optimum. The optional
/// vec-Jacobians (layout: row `i·d_θ + k` holds `∂²g_i/∂θ_k ∂·`) default
/// to zero, which is exact for moments linear in θ.
#[derive(Clone, Debug)]
pub struct GmmPieces {
    pub moments: DVector<f64>,
    /// `∂g/∂θ'`, `d_g × d_θ`.
    pub jac_theta: DMatrix<f64>,
    /// `∂g/∂γ'`, `d_g × d_γ`.
    pub jac_gamma: DMatrix<f64>,
    pub weights: DMatrix<f64>,
    pub vec_jac_theta_by_theta: Option<DMatrix<f64>>,
    pub vec_jac_theta_by_gamma: Option<DMatrix<f64>>,
}

/// The two substituted Hessian blocks `(∂²L̄/∂θ∂θ', ∂²L̄/∂θ∂γ')`.
pub fn gmm_hessian_blocks(pieces: &GmmPieces) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d_g = pieces.moments.len();
    let d_t = pieces.jac_theta.ncols();
    let d_gam = pieces.jac_gamma.ncols();
    if pieces.jac_theta.nrows() != d_g || pieces.jac_gamma.nrows() != d_g {
        return Err(Error::Dimension {
            what: "moment Jacobians",
            expected: d_g,
            found: pieces.jac_theta.nrows(),
        });
    }
    if pieces.weights.nrows() != d_g || pieces.weights.ncols() != d_g {
        return Err(Error::Dimension {
            what: "GMM weighting matrix",
            expected: d_g,
            found: pieces.weights.nrows(),
        });
    }

    let gw = pieces.weights.transpose() * &pieces.moments; // (g'W)' = W'g
    let contract = |vec_jac: &DMatrix<f64>, cols: usize| -> Result<DMatrix<f64>> {
        if vec_jac.nrows() != d_g * d_t || vec_jac.ncols() != cols {
            return Err(Error::Dimension {
                what: "GMM vec-Jacobian",
                expected: d_g * d_t,
                found: vec_jac.nrows(),
            });
        }
        let mut out = DMatrix::zeros(d_t, cols);
        for i in 0..d_g {
            out += vec_jac.rows(i * d_t, d_t).scale(gw[i]);
        }
        Ok(out)
    };

    let mut hessian = pieces.jac_theta.transpose() * &pieces.weights * &pieces.jac_theta;
    if let Some(vj) = &pieces.vec_jac_theta_by_theta {
        hessian += contract(vj, d_t)?;
    }
    let mut cross = pieces.jac_theta.transpose() * &pieces.weights * &pieces.jac_gamma;
    if let Some(vj) = &pieces.vec_jac_theta_by_gamma {
        cross += contract(vj, d_gam)?;
    }
    Ok((hessian, cross))
}

/// `∂θ/∂γ'` for the GMM problem.
pub fn gmm_sensitivity(pieces: &GmmPieces) -> Result<DMatrix<f64>> {
    let (hessian, cross) = gmm_hessian_blocks(pieces)?;
    unconstrained_sensitivity(&hessian, &cross)
}
