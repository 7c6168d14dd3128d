//! End-to-end analysis flows for the bus-engine application: fit, local
//! sensitivity with counterfactual propagation, named targets, and
//! re-estimation oracles. The command-line front end and the acceptance
//! suite both drive these.

use nalgebra::{DMatrix, DVector};

use crate::dp_core::{
    bellman_beta_derivative, bellman_jacobian_theta, ccp_from_values, ccp_to_utilities,
    frechet_derivative, solve_value_function_from, CcpMatrix, FixedPointOptions, PanelDataset,
    ValueVector,
};
use crate::error::{Error, Result};
use crate::estimate::{
    min_distance_estimate, nfxp_estimate, EstimationSolution, LinearUtilitySpec, NfxpOptions,
};
use crate::sense_global::{counterfactual_ccp_derivative_decomposition, CcpDerivativeTerms};
use crate::sense_local::{
    assemble_bundle_analytic, counterfactual_sensitivity, solve_sensitivity_system,
    CounterfactualSensitivity, SensitivityReport,
};
use crate::zurcher::{analytic_derivative_bank, CounterfactualSpec, ZurcherConfig};

/// A fitted bus-engine model.
#[derive(Clone, Debug)]
pub struct ZurcherFit {
    /// Config with `beta` set to the fitted run's discount factor.
    pub config: ZurcherConfig,
    pub solution: EstimationSolution,
    pub ccps: CcpMatrix,
}

/// Fits the model at `config.beta` on the panel.
pub fn fit_zurcher(
    config: &ZurcherConfig,
    data: &PanelDataset,
    init_theta: &DVector<f64>,
    opts: &NfxpOptions,
) -> Result<ZurcherFit> {
    let model = config.model()?;
    let solution = nfxp_estimate(&model, data, config.beta, init_theta, opts)?;
    let ccps = ccp_from_values(&model, solution.theta_hat.as_slice(), &solution.v_hat)?;
    Ok(ZurcherFit {
        config: *config,
        solution,
        ccps,
    })
}

/// The full local-sensitivity picture at a fit: baseline Jacobians from
/// the sensitivity system, the counterfactual solve and its propagated
/// Jacobians, welfare, and the per-state CCP derivative decomposition.
#[derive(Clone, Debug)]
pub struct ZurcherSensitivity {
    pub report: SensitivityReport,
    pub counterfactual: CounterfactualSpec,
    pub cf_theta: DVector<f64>,
    pub cf_v: ValueVector,
    pub cf_ccps: CcpMatrix,
    pub cf_sens: CounterfactualSensitivity,
    /// `W = (1/X) Σ_x [Ṽ(x) − V̂(x)]`.
    pub welfare: f64,
    pub dwelfare_dbeta: f64,
    pub ccp_terms: CcpDerivativeTerms,
}

/// Runs the sensitivity system and counterfactual propagation at a fit.
pub fn zurcher_sensitivity(
    fit: &ZurcherFit,
    data: &PanelDataset,
    counterfactual: &CounterfactualSpec,
) -> Result<ZurcherSensitivity> {
    let config = fit.config;
    let counts = data.counts();
    let bank = analytic_derivative_bank(
        &config,
        &fit.solution.theta_hat,
        &fit.solution.v_hat,
        &fit.ccps,
        &counts,
    )?;
    let bundle = assemble_bundle_analytic(&bank, &fit.solution.lambda_hat)?;
    let report = solve_sensitivity_system(&bundle)?
        .with_elasticities(&fit.solution.theta_hat, &fit.solution.gamma);

    // Counterfactual solve at H(θ̂).
    let model = config.model()?;
    let cf_model = counterfactual.counterfactual_model(&model)?;
    let cf_theta = counterfactual.apply(&fit.solution.theta_hat);
    let cf_v = solve_value_function_from(
        &cf_model,
        cf_theta.as_slice(),
        fit.solution.v_hat.clone(),
        &FixedPointOptions::default(),
    )?;
    let cf_ccps = ccp_from_values(&cf_model, cf_theta.as_slice(), &cf_v)?;

    // Constraint Jacobians at the counterfactual solution.
    let f_theta = bellman_jacobian_theta(&cf_model, cf_theta.as_slice(), &cf_v)?;
    let f_v = frechet_derivative(&cf_model, cf_theta.as_slice(), &cf_v)?;
    let f_beta = bellman_beta_derivative(&cf_model, cf_theta.as_slice(), &cf_v)?;
    let f_gamma = DMatrix::from_column_slice(f_beta.len(), 1, f_beta.as_slice());
    let cf_sens = counterfactual_sensitivity(
        &report,
        counterfactual.jacobian(),
        &f_theta,
        &f_v,
        &f_gamma,
    )?;

    let diff = cf_v.values() - fit.solution.v_hat.values();
    let welfare = diff.sum() / diff.len() as f64;
    let ddiff = cf_sens.dv_tilde_dgamma.column(0) - report.dv_dgamma.column(0);
    let dwelfare_dbeta = ddiff.sum() / ddiff.len() as f64;

    let ccp_terms = counterfactual_ccp_derivative_decomposition(
        &cf_ccps.action_column(1),
        &cf_sens.dtheta_tilde_dgamma.column(0).into_owned(),
        cf_v.values(),
        &cf_sens.dv_tilde_dgamma.column(0).into_owned(),
        &cf_model.transitions()[0],
        &cf_model.transitions()[1],
        config.beta,
    )?;

    Ok(ZurcherSensitivity {
        report,
        counterfactual: counterfactual.clone(),
        cf_theta,
        cf_v,
        cf_ccps,
        cf_sens,
        welfare,
        dwelfare_dbeta,
        ccp_terms,
    })
}

/// The four reported targets of the local analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    MaintenanceCost,
    ReplacementCost,
    /// Counterfactual replacement probability at a 1-based state.
    CounterfactualCcp { state: usize },
    WelfareChange,
}

impl TargetKind {
    pub fn name(&self) -> String {
        match self {
            TargetKind::MaintenanceCost => "maintenance_cost".into(),
            TargetKind::ReplacementCost => "replacement_cost".into(),
            TargetKind::CounterfactualCcp { state } => format!("cf_ccp_state_{state}"),
            TargetKind::WelfareChange => "welfare_change".into(),
        }
    }

    /// The standard set: both utility parameters, the counterfactual
    /// replacement probability at the top state, and the welfare change.
    pub fn standard_set(num_states: usize) -> Vec<TargetKind> {
        vec![
            TargetKind::ReplacementCost,
            TargetKind::MaintenanceCost,
            TargetKind::CounterfactualCcp { state: num_states },
            TargetKind::WelfareChange,
        ]
    }

    pub fn parse(text: &str, num_states: usize) -> Result<TargetKind> {
        match text {
            "mc" | "maintenance_cost" => Ok(TargetKind::MaintenanceCost),
            "rc" | "replacement_cost" => Ok(TargetKind::ReplacementCost),
            "welfare" | "welfare_change" => Ok(TargetKind::WelfareChange),
            other => {
                if let Some(rest) = other.strip_prefix("ccp@") {
                    let state: usize = rest.parse().map_err(|_| {
                        Error::Domain(format!("bad target state in {other:?}"))
                    })?;
                    if state < 1 || state > num_states {
                        return Err(Error::Domain(format!(
                            "target state {state} outside 1..={num_states}"
                        )));
                    }
                    Ok(TargetKind::CounterfactualCcp { state })
                } else {
                    Err(Error::Domain(format!(
                        "unknown target {other:?} (expected rc, mc, welfare, or ccp@<state>)"
                    )))
                }
            }
        }
    }
}

/// Target value and its discount-factor derivative at a fit.
#[derive(Clone, Debug)]
pub struct TargetEvaluation {
    pub kind: TargetKind,
    pub value: f64,
    pub derivative: f64,
}

pub fn evaluate_target(
    fit: &ZurcherFit,
    sens: &ZurcherSensitivity,
    kind: TargetKind,
) -> Result<TargetEvaluation> {
    let (value, derivative) = match kind {
        TargetKind::MaintenanceCost => (fit.solution.theta_hat[0], sens.report.dtheta(0, 0)),
        TargetKind::ReplacementCost => (fit.solution.theta_hat[1], sens.report.dtheta(1, 0)),
        TargetKind::CounterfactualCcp { state } => {
            if state < 1 || state > fit.config.num_states {
                return Err(Error::Domain(format!(
                    "target state {state} outside 1..={}",
                    fit.config.num_states
                )));
            }
            (
                sens.cf_ccps.prob(1, state),
                sens.ccp_terms.total[state - 1],
            )
        }
        TargetKind::WelfareChange => (sens.welfare, sens.dwelfare_dbeta),
    };
    Ok(TargetEvaluation {
        kind,
        value,
        derivative,
    })
}

/// Re-estimation oracle: fully refits at `beta` and returns the target
/// values there. Used for approximation-error columns and verification;
/// never needed for the sensitivity measure itself.
pub fn targets_at_beta(
    config: &ZurcherConfig,
    data: &PanelDataset,
    beta: f64,
    counterfactual: &CounterfactualSpec,
    kinds: &[TargetKind],
    init_theta: &DVector<f64>,
    opts: &NfxpOptions,
) -> Result<Vec<f64>> {
    let cfg = config.with_beta(beta);
    let fit = fit_zurcher(&cfg, data, init_theta, opts)?;
    targets_at_beta_from_fit(&cfg, &fit, counterfactual, kinds)
}

/// A profiling closure for bounds and breakdown search: each call fully
/// re-estimates at the given β (so the first-order conditions hold at
/// every evaluated point) and returns the target value, warm-starting θ
/// from the previous call.
pub fn target_profile_fn<'a>(
    config: &'a ZurcherConfig,
    data: &'a PanelDataset,
    counterfactual: &'a CounterfactualSpec,
    kind: TargetKind,
    opts: &'a NfxpOptions,
) -> impl FnMut(f64) -> Result<f64> + Send + 'a {
    let mut warm = DVector::zeros(2);
    move |beta: f64| {
        let cfg = config.with_beta(beta);
        let fit = fit_zurcher(&cfg, data, &warm, opts)?;
        warm = fit.solution.theta_hat.clone();
        let values = targets_at_beta_from_fit(&cfg, &fit, counterfactual, &[kind])?;
        Ok(values[0])
    }
}

fn targets_at_beta_from_fit(
    cfg: &ZurcherConfig,
    fit: &ZurcherFit,
    counterfactual: &CounterfactualSpec,
    kinds: &[TargetKind],
) -> Result<Vec<f64>> {
    let model = cfg.model()?;
    let cf_model = counterfactual.counterfactual_model(&model)?;
    let cf_theta = counterfactual.apply(&fit.solution.theta_hat);
    let cf_v = solve_value_function_from(
        &cf_model,
        cf_theta.as_slice(),
        fit.solution.v_hat.clone(),
        &FixedPointOptions::default(),
    )?;
    let cf_ccps = ccp_from_values(&cf_model, cf_theta.as_slice(), &cf_v)?;
    let diff = cf_v.values() - fit.solution.v_hat.values();
    let welfare = diff.sum() / diff.len() as f64;

    kinds
        .iter()
        .map(|kind| match kind {
            TargetKind::MaintenanceCost => Ok(fit.solution.theta_hat[0]),
            TargetKind::ReplacementCost => Ok(fit.solution.theta_hat[1]),
            TargetKind::CounterfactualCcp { state } => {
                if *state < 1 || *state > cfg.num_states {
                    return Err(Error::Domain(format!(
                        "target state {state} outside 1..={}",
                        cfg.num_states
                    )));
                }
                Ok(cf_ccps.prob(1, *state))
            }
            TargetKind::WelfareChange => Ok(welfare),
        })
        .collect()
}

/// Two-step estimate at a given discount factor: invert the (fixed,
/// data-estimated) CCPs into maintenance utilities at that β and project
/// onto the `(−x, 1)` coefficient rows under identity weights.
pub fn two_step_theta(
    ccps: &CcpMatrix,
    config: &ZurcherConfig,
    beta: f64,
) -> Result<DVector<f64>> {
    let (q0, q1) = crate::zurcher::build_transitions(config)?;
    let utilities = ccp_to_utilities(ccps, &[q0, q1], beta)?;
    let spec = LinearUtilitySpec::identity_weights(LinearUtilitySpec::zurcher_maintenance_pi(
        config.num_states,
    ));
    min_distance_estimate(&utilities[0], &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zurcher::simulate_panel;

    #[test]
    fn sensitivity_pipeline_runs_at_desk_scale() {
        let cfg = ZurcherConfig {
            num_states: 8,
            phi1: 0.4,
            phi2: 0.15,
            mc: 0.3,
            rc: 4.0,
            beta: 0.9,
        };
        let panel = simulate_panel(&cfg, 30, 150, 21).unwrap();
        let fit = fit_zurcher(&cfg, &panel, &DVector::zeros(2), &NfxpOptions::default()).unwrap();
        let sens =
            zurcher_sensitivity(&fit, &panel, &CounterfactualSpec::mc_reduction(0.1)).unwrap();
        assert!(sens.report.condition_number.is_finite());
        assert!(sens.welfare > 0.0);

        let targets = TargetKind::standard_set(cfg.num_states);
        for kind in targets {
            let t = evaluate_target(&fit, &sens, kind).unwrap();
            assert!(t.value.is_finite() && t.derivative.is_finite());
        }
    }

    #[test]
    fn identity_counterfactual_reproduces_baseline_sensitivities() {
        let cfg = ZurcherConfig {
            num_states: 6,
            phi1: 0.4,
            phi2: 0.1,
            mc: 0.4,
            rc: 3.0,
            beta: 0.85,
        };
        let panel = simulate_panel(&cfg, 30, 120, 33).unwrap();
        let fit = fit_zurcher(&cfg, &panel, &DVector::zeros(2), &NfxpOptions::default()).unwrap();
        let sens = zurcher_sensitivity(&fit, &panel, &CounterfactualSpec::identity(2)).unwrap();
        assert!(
            (&sens.cf_sens.dtheta_tilde_dgamma - &sens.report.dtheta_dgamma).amax() < 1e-12
        );
        assert!((&sens.cf_sens.dv_tilde_dgamma - &sens.report.dv_dgamma).amax() < 1e-9);
        assert!(sens.welfare.abs() < 1e-12);
    }

    #[test]
    fn target_parsing_accepts_the_documented_names() {
        assert_eq!(
            TargetKind::parse("rc", 20).unwrap(),
            TargetKind::ReplacementCost
        );
        assert_eq!(
            TargetKind::parse("ccp@20", 20).unwrap(),
            TargetKind::CounterfactualCcp { state: 20 }
        );
        assert!(TargetKind::parse("ccp@21", 20).is_err());
        assert!(TargetKind::parse("nonsense", 20).is_err());
    }
}
