//! Two-step minimum-distance estimation of linear-in-parameters
//! utilities: given utilities recovered from CCPs, solve
//! `min_θ (π̂ − Πθ)'W(π̂ − Πθ)` in closed form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lu_solve;

/// Stacked coefficient matrix `Π` and weighting matrix `W` of the
/// minimum-distance problem.
#[derive(Clone, Debug)]
pub struct LinearUtilitySpec {
    pi: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl LinearUtilitySpec {
    /// Requires `W` symmetric positive definite and conformable with `Π`.
    pub fn new(pi: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != pi.nrows() || w.ncols() != pi.nrows() {
            return Err(Error::Dimension {
                what: "weighting matrix",
                expected: pi.nrows(),
                found: w.nrows(),
            });
        }
        let asym = (&w - w.transpose()).amax();
        if asym > 1e-10 * w.amax().max(1.0) {
            return Err(Error::Domain(format!(
                "weighting matrix is not symmetric (asymmetry {asym:.3e})"
            )));
        }
        if w.clone().cholesky().is_none() {
            return Err(Error::Domain(
                "weighting matrix is not positive definite".into(),
            ));
        }
        Ok(Self { pi, w })
    }

    pub fn identity_weights(pi: DMatrix<f64>) -> Self {
        let n = pi.nrows();
        Self {
            pi,
            w: DMatrix::identity(n, n),
        }
    }

    /// Maintenance-action coefficient rows `(−x, 1)` for `x = 1..=X`, so
    /// that `Π₀ θ` with `θ = (MC, RC)` reproduces `RC − MC·x`.
    pub fn zurcher_maintenance_pi(num_states: usize) -> DMatrix<f64> {
        DMatrix::from_fn(num_states, 2, |x, k| {
            if k == 0 {
                -((x + 1) as f64)
            } else {
                1.0
            }
        })
    }

    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `Π'WΠ`, the normal-equation matrix.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        self.pi.transpose() * &self.w * &self.pi
    }
}

/// Weighted least-squares solution `θ̂ = (Π'WΠ)⁻¹ Π'W π̂`.
pub fn min_distance_estimate(pi_hat: &DVector<f64>, spec: &LinearUtilitySpec) -> Result<DVector<f64>> {
    if pi_hat.len() != spec.pi.nrows() {
        return Err(Error::Dimension {
            what: "stacked utilities",
            expected: spec.pi.nrows(),
            found: pi_hat.len(),
        });
    }
    let lhs = spec.normal_matrix();
    let rhs = spec.pi.transpose() * &spec.w * pi_hat;
    lu_solve(&lhs, &rhs, "min-distance normal equations")
}
