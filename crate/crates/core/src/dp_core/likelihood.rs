//! Multinomial panel log-likelihood and its first derivatives.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

use super::bellman::ccp_from_values;
use super::model::{DdcModel, ValueVector};
use super::panel::{PanelDataset, StateActionCounts};

/// Log-likelihood `L(θ, V; β) = Σ_records log P[a | x]` evaluated at a
/// candidate `(θ, V)`; the caller is responsible for `V` being the solved
/// fixed point when an exact profiled likelihood is wanted.
pub fn log_likelihood(
    model: &DdcModel,
    theta: &[f64],
    v: &ValueVector,
    data: &PanelDataset,
) -> Result<f64> {
    let counts = data.counts();
    log_likelihood_from_counts(model, theta, v, &counts)
}

pub(crate) fn log_likelihood_from_counts(
    model: &DdcModel,
    theta: &[f64],
    v: &ValueVector,
    counts: &StateActionCounts,
) -> Result<f64> {
    let p = ccp_from_values(model, theta, v)?;
    let mut terms = Vec::with_capacity(model.num_states() * model.num_actions());
    for x in 1..=model.num_states() {
        for a in 0..model.num_actions() {
            let n = counts.at(x, a);
            if n == 0.0 {
                continue;
            }
            let prob = p.prob(a, x);
            if prob <= 0.0 {
                return Err(Error::Domain(format!(
                    "probability underflow at action {a}, state {x}"
                )));
            }
            terms.push(n * prob.ln());
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Log-likelihood with its gradients in `θ` and `V`.
#[derive(Clone, Debug)]
pub struct LikelihoodDerivatives {
    pub value: f64,
    /// `∂L/∂θ`, length `d_θ`.
    pub d_theta: DVector<f64>,
    /// `∂L/∂V`, length `X`.
    pub d_v: DVector<f64>,
}

/// Evaluates `L` together with `∂L/∂θ` and `∂L/∂V`.
///
/// Per observation at `(x, a)`: the θ-score is
/// `∂π(a,x)/∂θ − Σ_j P[j|x] ∂π(j,x)/∂θ` and the V-score at state `y` is
/// `β[q(y|x,a) − Σ_j P[j|x] q(y|x,j)]`.
pub fn log_likelihood_derivatives(
    model: &DdcModel,
    theta: &[f64],
    v: &ValueVector,
    counts: &StateActionCounts,
) -> Result<LikelihoodDerivatives> {
    let p = ccp_from_values(model, theta, v)?;
    let d_theta_dim = model.theta_dim();
    let x_dim = model.num_states();
    let n_act = model.num_actions();
    let beta = model.beta();

    let mut value_terms = Vec::with_capacity(x_dim * n_act);
    let mut d_theta = DVector::zeros(d_theta_dim);
    let mut d_v = DVector::zeros(x_dim);

    for x in 1..=x_dim {
        let n_x = counts.state_total(x);
        if n_x == 0.0 {
            continue;
        }
        // Choice-probability-weighted utility gradient and transition row.
        let mut mean_grad = vec![0.0; d_theta_dim];
        let mut mean_q = vec![0.0; x_dim];
        for j in 0..n_act {
            let pj = p.prob(j, x);
            let g = model.utility_grad(theta, j, x);
            for k in 0..d_theta_dim {
                mean_grad[k] += pj * g[k];
            }
            let q = model.transition(j);
            for y in 0..x_dim {
                mean_q[y] += pj * q[(x - 1, y)];
            }
        }
        for a in 0..n_act {
            let n = counts.at(x, a);
            if n == 0.0 {
                continue;
            }
            let prob = p.prob(a, x);
            if prob <= 0.0 {
                return Err(Error::Domain(format!(
                    "probability underflow at action {a}, state {x}"
                )));
            }
            value_terms.push(n * prob.ln());
            let g = model.utility_grad(theta, a, x);
            for k in 0..d_theta_dim {
                d_theta[k] += n * (g[k] - mean_grad[k]);
            }
            let q = model.transition(a);
            for y in 0..x_dim {
                d_v[y] += n * beta * (q[(x - 1, y)] - mean_q[y]);
            }
        }
    }

    Ok(LikelihoodDerivatives {
        value: pairwise_sum(&value_terms),
        d_theta,
        d_v,
    })
}
