//! Decomposition of the counterfactual CCP's discount-factor derivative.
//!
//! Total differentiation of `p̃(x) = 1/(1 + exp{R̃C − M̃C·x + β[Q_0(x) − Q_1(x)]'Ṽ})`
//! in β gives `∂p̃(x)/∂β = −(a)·[(b) + (c)]` with
//!
//! - `(a) = p̃(x)(1 − p̃(x))`,
//! - `(b) = −(∂M̃C/∂β)·x + ∂R̃C/∂β`,
//! - `(c) = [Q_0(x) − Q_1(x)]'(Ṽ + β ∂Ṽ/∂β)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-state terms of the decomposition and their assembled product.
#[derive(Clone, Debug)]
pub struct CcpDerivativeTerms {
    pub logistic_weight: DVector<f64>,
    pub parameter_shift: DVector<f64>,
    pub continuation_shift: DVector<f64>,
    /// `∂p̃(x)/∂β = −(a)[(b) + (c)]` per state.
    pub total: DVector<f64>,
}

/// Assembles the three terms from the counterfactual fit and its
/// sensitivities. `p_tilde` is the replacement-probability column,
/// `dtheta_tilde` the `(∂M̃C/∂β, ∂R̃C/∂β)` pair from the counterfactual
/// chain rule, and `dv_tilde` the counterfactual value sensitivity.
pub fn counterfactual_ccp_derivative_decomposition(
    p_tilde: &DVector<f64>,
    dtheta_tilde: &DVector<f64>,
    v_tilde: &DVector<f64>,
    dv_tilde: &DVector<f64>,
    q0: &DMatrix<f64>,
    q1: &DMatrix<f64>,
    beta: f64,
) -> Result<CcpDerivativeTerms> {
    let n = p_tilde.len();
    if dtheta_tilde.len() != 2 {
        return Err(Error::Dimension {
            what: "counterfactual theta derivative",
            expected: 2,
            found: dtheta_tilde.len(),
        });
    }
    if v_tilde.len() != n || dv_tilde.len() != n || q0.nrows() != n || q1.nrows() != n {
        return Err(Error::Dimension {
            what: "ccp decomposition inputs",
            expected: n,
            found: v_tilde.len(),
        });
    }

    let effective_v = v_tilde + dv_tilde.scale(beta);
    let shifted = (q0 - q1) * effective_v;

    let mut logistic_weight = DVector::zeros(n);
    let mut parameter_shift = DVector::zeros(n);
    let mut total = DVector::zeros(n);
    for x in 0..n {
        let a = p_tilde[x] * (1.0 - p_tilde[x]);
        let b = -dtheta_tilde[0] * (x + 1) as f64 + dtheta_tilde[1];
        logistic_weight[x] = a;
        parameter_shift[x] = b;
        total[x] = -a * (b + shifted[x]);
    }
    Ok(CcpDerivativeTerms {
        logistic_weight,
        parameter_shift,
        continuation_shift: shifted,
        total,
    })
}
