//! Estimators: nested fixed-point maximum likelihood with multiplier
//! recovery, the first-stage CCP logit, and the two-step minimum-distance
//! estimator for linear-in-parameters utilities.

mod ccp_logit;
mod min_distance;
mod nfxp;

pub use ccp_logit::{ccp_logit_estimate, ccp_logit_estimate_with_degree};
pub use min_distance::{min_distance_estimate, LinearUtilitySpec};
pub use nfxp::{nfxp_estimate, recover_multiplier, Convergence, EstimationSolution, NfxpOptions};
