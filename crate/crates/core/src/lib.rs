//! Estimation and fixed-parameter sensitivity analysis for stationary
//! dynamic discrete choice models.
//!
//! Structural estimates condition on parameters that are calibrated
//! rather than estimated — above all the discount factor. This crate
//! fits such models (nested fixed-point maximum likelihood and a
//! CCP-based two-step), then asks how everything downstream moves with
//! the calibrated parameters:
//!
//! - [`sense_local`] solves one linear system at the fitted optimum for
//!   the exact Jacobians of parameters, value function, and multiplier
//!   with respect to the fixed parameters — no re-estimation — and
//!   propagates them through counterfactuals.
//! - [`sense_global`] works over the whole admissible range: analytic
//!   discount-factor derivatives of CCP-implied utilities, monotonicity
//!   certificates, bounds by profiled re-estimation, and
//!   breakdown-frontier search.
//! - [`zurcher`] is the concrete bus-engine replacement model used by
//!   the bundled examples and tests; [`dp_core`] is the model-agnostic
//!   machinery underneath.

pub mod dp_core;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod pipeline;
pub mod sense_global;
pub mod sense_local;
pub mod zurcher;

pub use error::{Error, Result};
