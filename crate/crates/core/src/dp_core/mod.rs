//! Model-agnostic machinery for stationary single-agent dynamic discrete
//! choice models with additively separable T1EV shocks.
//!
//! States are the integers `1..=X` throughout; matrices and vectors are
//! indexed by `state - 1`. Actions are `0..=A`, with the last action `A`
//! serving as the reference choice for inversion and normalization.

mod bellman;
mod inversion;
mod likelihood;
mod model;
mod panel;

pub use bellman::{
    bellman_apply, bellman_beta_derivative, bellman_jacobian_theta, ccp_from_values,
    choice_values, frechet_derivative, solve_value_function, solve_value_function_from,
    FixedPointOptions,
};
pub use inversion::{
    ccp_to_utilities, ccp_to_utilities_normalized, ccp_to_utilities_with_psi, hotz_miller_csv,
    psi_t1ev,
};
pub use likelihood::{log_likelihood, log_likelihood_derivatives, LikelihoodDerivatives};
pub use model::{CcpMatrix, DdcModel, UtilityFn, UtilityGradFn, ValueVector};
pub use panel::{PanelDataset, Record, StateActionCounts};
