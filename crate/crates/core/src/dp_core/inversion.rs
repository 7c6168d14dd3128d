//! Inversion from choice probabilities back to values and utilities.
//!
//! Under T1EV shocks the map from choice-specific value differences to
//! CCPs is invertible in closed form, and the flow utilities themselves
//! can be recovered from the CCPs and transition matrices once the
//! reference action's utility is pinned down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lu_solve;

use super::model::CcpMatrix;

/// Choice-specific value differences `v(a,x) = log P[a|x] − log P[A|x]`
/// under the `v(A,x) = 0` normalization, with the last action as the
/// reference `A`. The reference column is identically zero.
pub fn hotz_miller_csv(p: &CcpMatrix) -> DMatrix<f64> {
    let x_dim = p.num_states();
    let n_act = p.num_actions();
    let reference = n_act - 1;
    let mut v = DMatrix::zeros(x_dim, n_act);
    for x in 1..=x_dim {
        let log_ref = p.prob(reference, x).ln();
        for a in 0..n_act {
            v[(x - 1, a)] = if a == reference {
                0.0
            } else {
                p.prob(a, x).ln() - log_ref
            };
        }
    }
    v
}

/// The T1EV instance of the `ψ_a(p)` correction: `ψ_a(p) = −log p_a`.
pub fn psi_t1ev(p_a: &DVector<f64>) -> DVector<f64> {
    p_a.map(|p| -p.ln())
}

/// Recovers flow utilities from CCPs under the `π_A = 0` normalization:
///
/// `π_a = (I − βQ_a)(I − βQ_A)⁻¹(−log p_A) + log p_a`
///
/// for every `a ≠ A`, with the last action as the reference. The inverse
/// is applied as a linear solve.
pub fn ccp_to_utilities(
    p: &CcpMatrix,
    transitions: &[DMatrix<f64>],
    beta: f64,
) -> Result<Vec<DVector<f64>>> {
    ccp_to_utilities_with_psi(p, transitions, beta, None, psi_t1ev)
}

/// Same recovery with the reference utility normalized to `π_A = π̄_A`
/// instead of zero, which only replaces `−log p_A` by `π̄_A − log p_A`.
pub fn ccp_to_utilities_normalized(
    p: &CcpMatrix,
    transitions: &[DMatrix<f64>],
    beta: f64,
    pi_bar_ref: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    ccp_to_utilities_with_psi(p, transitions, beta, Some(pi_bar_ref), psi_t1ev)
}

/// Generic version over the shock-distribution hook `ψ`: for a CCP column
/// `p_a` the correction `ψ(p_a)` replaces `−log p_a`. Only the T1EV
/// instance ships, but the slot accepts any distribution's map.
pub fn ccp_to_utilities_with_psi(
    p: &CcpMatrix,
    transitions: &[DMatrix<f64>],
    beta: f64,
    pi_bar_ref: Option<&DVector<f64>>,
    psi: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let x_dim = p.num_states();
    let n_act = p.num_actions();
    if transitions.len() != n_act {
        return Err(Error::Dimension {
            what: "transition list vs CCP actions",
            expected: n_act,
            found: transitions.len(),
        });
    }
    if n_act < 2 {
        return Err(Error::Domain("need at least two actions to invert".into()));
    }
    let reference = n_act - 1;
    let eye = DMatrix::<f64>::identity(x_dim, x_dim);
    let i_minus_bq_ref = &eye - transitions[reference].scale(beta);

    let p_ref = p.action_column(reference);
    let mut target = psi(&p_ref);
    if let Some(pi_bar) = pi_bar_ref {
        if pi_bar.len() != x_dim {
            return Err(Error::Dimension {
                what: "reference utility vector",
                expected: x_dim,
                found: pi_bar.len(),
            });
        }
        target += pi_bar;
    }
    // w = (I − βQ_A)⁻¹ (π̄_A + ψ_A(p))
    let w = lu_solve(&i_minus_bq_ref, &target, "ccp_to_utilities")?;

    let mut utilities = Vec::with_capacity(n_act - 1);
    for (a, q_a) in transitions.iter().take(reference).enumerate() {
        let lhs = (&eye - q_a.scale(beta)) * &w;
        let corr = psi(&p.action_column(a));
        utilities.push(lhs - corr);
    }
    Ok(utilities)
}
