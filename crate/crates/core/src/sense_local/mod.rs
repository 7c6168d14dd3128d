//! Local sensitivity of constrained estimates to fixed parameters.
//!
//! At a fitted optimum of `max L(θ, V; γ)` subject to `V = F(θ, V; γ)`,
//! total differentiation of the first-order conditions in `γ` yields one
//! linear system of `2d_V + d_θ` equations whose solution is the full set
//! of Jacobians `∂θ/∂γ'`, `∂V/∂γ'`, `∂λ/∂γ'` — no re-estimation needed.
//! This module assembles and solves that system, specializes it to
//! unconstrained and GMM estimators, propagates it through
//! counterfactuals, and turns it into elasticity tables and first-order
//! approximations.

mod bundle;
mod counterfactual;
mod elasticity;
mod gmm;
mod system;
mod taylor;

pub use bundle::{
    assemble_bundle_analytic, assemble_bundle_numeric, DerivativeBundle, SensePoint,
    DEFAULT_NUMERIC_STEP,
};
pub use counterfactual::{counterfactual_sensitivity, CounterfactualSensitivity};
pub use elasticity::{elasticity, scalar_elasticity, semi_elasticity, FlaggedTable};
pub use gmm::{gmm_hessian_blocks, gmm_sensitivity, GmmPieces};
pub use system::{
    solve_sensitivity_system, substituted_hessian_blocks, unconstrained_sensitivity,
    SensitivityReport,
};
pub use taylor::{approximation_error_table, taylor_approximate, ApproximationErrorRow};
