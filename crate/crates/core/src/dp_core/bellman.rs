//! Bellman operator, fixed-point solver, and choice probabilities.
//!
//! The ex ante value function solves `V(x) = log Σ_a exp[π(a,x;θ) + β Q_a(x)'V]`.
//! Successive approximation converges globally (the operator is a
//! β-contraction in the sup norm); a terminal Newton polish on the residual
//! delivers the near-machine accuracy the sensitivity systems need.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, sup_norm};

use super::model::{CcpMatrix, DdcModel, ValueVector};

/// Tolerances for [`solve_value_function`].
#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    /// Sup-norm residual target for successive approximation.
    pub tol: f64,
    /// Iteration cap for successive approximation.
    pub max_iter: usize,
    /// Residual target for the Newton polish, relative to `max(1, ‖V‖∞)`.
    pub newton_tol: f64,
    /// Newton step cap.
    pub max_newton: usize,
    /// Hand over to Newton after this many successive-approximation
    /// iterations even if `tol` has not been reached. Successive
    /// approximation alone needs O(1/(1−β)) iterations, which is
    /// prohibitive for discount factors near one; Newton converges from
    /// the contraction's basin in a handful of steps.
    pub newton_after: Option<usize>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            newton_tol: 1e-12,
            max_newton: 5,
            newton_after: None,
        }
    }
}

impl FixedPointOptions {
    /// Settings for discount factors close to one: a short successive-
    /// approximation warmup followed by a generous Newton budget.
    pub fn near_one() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            newton_tol: 1e-12,
            max_newton: 60,
            newton_after: Some(80),
        }
    }
}

/// Choice-specific values `v(a, x) = π(a,x;θ) + β Q_a(x)'V` as an
/// `X × (A+1)` matrix.
pub fn choice_values(model: &DdcModel, theta: &[f64], v: &ValueVector) -> Result<DMatrix<f64>> {
    let x_dim = model.num_states();
    let n_act = model.num_actions();
    let beta = model.beta();
    let mut cv = DMatrix::zeros(x_dim, n_act);
    for a in 0..n_act {
        let cont = model.transition(a) * v.values();
        for x in 1..=x_dim {
            let flow = model.utility(theta, a, x);
            if !flow.is_finite() {
                return Err(Error::NonFiniteUtility { action: a, state: x });
            }
            cv[(x - 1, a)] = flow + beta * cont[x - 1];
        }
    }
    Ok(cv)
}

/// One application of the Bellman operator: the log-sum-exp of the
/// choice-specific values at every state, evaluated with a max shift so
/// inputs up to ±700 in magnitude never overflow.
pub fn bellman_apply(model: &DdcModel, theta: &[f64], v: &ValueVector) -> Result<ValueVector> {
    let cv = choice_values(model, theta, v)?;
    let mut out = DVector::zeros(model.num_states());
    for x in 0..model.num_states() {
        out[x] = log_sum_exp(cv.row(x).iter().copied());
    }
    ValueVector::new(out)
}

fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = vals.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Solves the fixed point `V = Ψ(θ, V; β)` from a cold start.
pub fn solve_value_function(
    model: &DdcModel,
    theta: &[f64],
    opts: &FixedPointOptions,
) -> Result<ValueVector> {
    solve_value_function_from(model, theta, ValueVector::zeros(model.num_states()), opts)
}

/// Solves the fixed point from a warm start. Successive approximation
/// until the residual drops below `max(tol, 10·ε·‖V‖∞)`, then up to
/// `max_newton` Newton steps on `Ψ(V) − V` using the dense Fréchet
/// derivative.
pub fn solve_value_function_from(
    model: &DdcModel,
    theta: &[f64],
    start: ValueVector,
    opts: &FixedPointOptions,
) -> Result<ValueVector> {
    let mut v = start;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for iter in 0..opts.max_iter {
        let next = bellman_apply(model, theta, &v)?;
        residual = sup_norm(&(next.values() - v.values()));
        let floor = 10.0 * f64::EPSILON * sup_norm(next.values());
        v = next;
        if residual <= opts.tol.max(floor) {
            converged = true;
            break;
        }
        if opts.newton_after.is_some_and(|k| iter + 1 >= k) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations: opts.max_iter,
            residual,
        });
    }

    // Newton polish: solve (I − F_V) δ = Ψ(V) − V.
    let eye = DMatrix::<f64>::identity(model.num_states(), model.num_states());
    let mut last_residual = residual;
    for _ in 0..opts.max_newton {
        let psi = bellman_apply(model, theta, &v)?;
        let r = psi.values() - v.values();
        last_residual = sup_norm(&r);
        if last_residual <= opts.newton_tol * sup_norm(v.values()).max(1.0) {
            return Ok(v);
        }
        let p = ccp_from_values(model, theta, &v)?;
        let f_v = frechet_from_ccp(model, &p);
        let delta = lu_solve(&(&eye - &f_v), &r, "value-function Newton step")?;
        v = ValueVector::new(v.values() + delta)?;
    }
    // With the default settings successive approximation already met
    // `tol`, so a spent Newton budget is only fatal when the warmup was
    // cut short and the requested tolerance was never reached.
    if opts.newton_after.is_some() && last_residual > opts.tol {
        let psi = bellman_apply(model, theta, &v)?;
        let r = sup_norm(&(psi.values() - v.values()));
        if r > opts.tol {
            return Err(Error::Convergence {
                iterations: opts.max_iter,
                residual: r,
            });
        }
    }
    Ok(v)
}

/// Logit choice probabilities implied by a candidate value function.
pub fn ccp_from_values(model: &DdcModel, theta: &[f64], v: &ValueVector) -> Result<CcpMatrix> {
    let cv = choice_values(model, theta, v)?;
    let mut probs = DMatrix::zeros(cv.nrows(), cv.ncols());
    for x in 0..cv.nrows() {
        let max = cv.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for a in 0..cv.ncols() {
            let e = (cv[(x, a)] - max).exp();
            probs[(x, a)] = e;
            denom += e;
        }
        for a in 0..cv.ncols() {
            probs[(x, a)] /= denom;
        }
    }
    CcpMatrix::new(probs)
}

/// Fréchet derivative of the Bellman operator with respect to `V`:
/// `F_V[x, y] = β Σ_a P[a|x] q(y | x, a)`.
pub fn frechet_derivative(model: &DdcModel, theta: &[f64], v: &ValueVector) -> Result<DMatrix<f64>> {
    let p = ccp_from_values(model, theta, v)?;
    Ok(frechet_from_ccp(model, &p))
}

fn frechet_from_ccp(model: &DdcModel, p: &CcpMatrix) -> DMatrix<f64> {
    let x_dim = model.num_states();
    let mut f_v = DMatrix::zeros(x_dim, x_dim);
    for a in 0..model.num_actions() {
        let q = model.transition(a);
        for x in 0..x_dim {
            let w = model.beta() * p.probs()[(x, a)];
            for y in 0..x_dim {
                f_v[(x, y)] += w * q[(x, y)];
            }
        }
    }
    f_v
}

/// Jacobian of the Bellman operator with respect to θ:
/// `F_θ[x, ·] = Σ_a P[a|x] ∂π(a,x;θ)/∂θ`.
pub fn bellman_jacobian_theta(
    model: &DdcModel,
    theta: &[f64],
    v: &ValueVector,
) -> Result<DMatrix<f64>> {
    let p = ccp_from_values(model, theta, v)?;
    let mut f_t = DMatrix::zeros(model.num_states(), model.theta_dim());
    for x in 1..=model.num_states() {
        for a in 0..model.num_actions() {
            let g = model.utility_grad(theta, a, x);
            for k in 0..model.theta_dim() {
                f_t[(x - 1, k)] += p.prob(a, x) * g[k];
            }
        }
    }
    Ok(f_t)
}

/// Derivative of the Bellman operator with respect to the discount
/// factor: `∂F(x)/∂β = Σ_a P[a|x] Q_a(x)'V`.
pub fn bellman_beta_derivative(
    model: &DdcModel,
    theta: &[f64],
    v: &ValueVector,
) -> Result<DVector<f64>> {
    let p = ccp_from_values(model, theta, v)?;
    let mut f_b = DVector::zeros(model.num_states());
    for a in 0..model.num_actions() {
        let cont = model.transition(a) * v.values();
        for x in 0..model.num_states() {
            f_b[x] += p.probs()[(x, a)] * cont[x];
        }
    }
    Ok(f_b)
}
