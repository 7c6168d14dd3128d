//! The bus-engine replacement model: mileage transitions with a renewal
//! reset, linear maintenance cost, panel simulation, and the analytic
//! derivative bank behind the local sensitivity system.
//!
//! Conventions used throughout: action 0 maintains the engine with flow
//! utility `RC − MC·x` at mileage state `x`, action 1 replaces it with
//! flow utility 0 and resets mileage to state 1; `p(x)` always denotes
//! the replacement probability `P[a = 1 | x]`.

mod bank;
mod config;
mod counterfactual;
mod simulate;

pub use bank::{analytic_derivative_bank, DerivativeBank};
pub use config::{build_transitions, flow_utility, ZurcherConfig};
pub use counterfactual::{counterfactual_welfare, CounterfactualSpec};
pub use simulate::simulate_panel;
