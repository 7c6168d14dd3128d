//! Global sensitivity: analytic discount-factor derivatives of
//! CCP-implied utilities, monotonicity certificates, parameter
//! derivatives under linear utilities, bound estimation over an interval
//! of the fixed parameter, and breakdown-frontier search.

mod beta_derivative;
mod bounds;
mod breakdown;
mod ccp_decomp;
mod linear_params;
mod monotonicity;

pub use beta_derivative::{
    finite_dependence_derivative, normalized_utility_beta_derivative, utility_beta_derivative,
    verify_finite_dependence,
};
pub use bounds::{bounds_estimate, bounds_estimate_threaded, BoundsMethod, BoundsResult};
pub use breakdown::{breakdown_frontier, BreakdownOutcome, RobustIf};
pub use ccp_decomp::{counterfactual_ccp_derivative_decomposition, CcpDerivativeTerms};
pub use linear_params::{theta_beta_derivative, theta_delta_derivative};
pub use monotonicity::{
    one_period_slope_verdict, renewal_monotonicity_check, sign_scan_verdict, Certificate,
    Direction, MonotonicityVerdict,
};
