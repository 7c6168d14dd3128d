//! The six analysis commands. Each one reads the shared config, writes
//! its outputs under the chosen directory, and prints a one-line summary
//! per artifact.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde_json::json;

use ddc_sense::dp_core::PanelDataset;
use ddc_sense::estimate::{ccp_logit_estimate, EstimationSolution, NfxpOptions};
use ddc_sense::pipeline::{
    evaluate_target, fit_zurcher, target_profile_fn, targets_at_beta, two_step_theta,
    zurcher_sensitivity, TargetKind, ZurcherFit,
};
use ddc_sense::sense_global::{
    bounds_estimate, bounds_estimate_threaded, breakdown_frontier, renewal_monotonicity_check,
    sign_scan_verdict, BoundsMethod, BreakdownOutcome, Direction, RobustIf,
};
use ddc_sense::sense_local::{elasticity, scalar_elasticity, semi_elasticity};
use ddc_sense::zurcher::{build_transitions, simulate_panel, CounterfactualSpec, ZurcherConfig};
use ddc_sense::{Error, Result};

use crate::config::RunConfig;
use crate::tables::{
    write_bounds_csv, write_sensitivity_csv, write_tidy_csv, write_verdict_csv, BoundsRow,
    SensitivityRow, VerdictRow,
};

/// Global command-line options shared by every subcommand.
#[derive(Clone, Debug)]
pub struct CliOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: usize,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

struct DataSource {
    panel: PanelDataset,
    description: String,
}

fn load_panel(cfg: &RunConfig, model: &ZurcherConfig, opts: &CliOptions) -> Result<DataSource> {
    let source = cfg.str_or("data", "source", "simulate")?;
    match source.as_str() {
        "simulate" => {
            let units = cfg.usize_or("data", "units", 100)?;
            let periods = cfg.usize_or("data", "periods", 200)?;
            let seed = opts.seed.unwrap_or(cfg.u64_or("data", "seed", 42)?);
            let panel = simulate_panel(model, units, periods, seed)?;
            Ok(DataSource {
                panel,
                description: format!("simulated {units}x{periods} panel, seed {seed}"),
            })
        }
        "file" => {
            let rel = cfg
                .str_opt("data", "path")?
                .ok_or_else(|| Error::Domain("config needs [data] path for source = \"file\"".into()))?;
            let path = cfg.resolve_path(&rel);
            let panel = PanelDataset::from_csv(&path, model.num_states, 2)?;
            Ok(DataSource {
                panel,
                description: format!("panel from {}", path.display()),
            })
        }
        other => Err(Error::Domain(format!(
            "unknown [data] source {other:?} (expected \"simulate\" or \"file\")"
        ))),
    }
}

fn nfxp_options(cfg: &RunConfig) -> Result<NfxpOptions> {
    Ok(NfxpOptions {
        multi_start: cfg.bool_or("estimate", "multi_start", false)?,
        ..NfxpOptions::default()
    })
}

fn init_theta(cfg: &RunConfig) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(vec![
        cfg.f64_or("estimate", "init_mc", 0.0)?,
        cfg.f64_or("estimate", "init_rc", 0.0)?,
    ]))
}

fn counterfactual_from(cfg: &RunConfig, section: &str) -> Result<CounterfactualSpec> {
    let reduction = cfg.f64_or(section, "cf_mc_reduction", 0.1)?;
    Ok(CounterfactualSpec::mc_reduction(reduction))
}

pub fn cmd_simulate(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    let model = cfg.model()?;
    let units = cfg.usize_or("data", "units", 100)?;
    let periods = cfg.usize_or("data", "periods", 200)?;
    let seed = opts.seed.unwrap_or(cfg.u64_or("data", "seed", 42)?);
    let panel = simulate_panel(&model, units, periods, seed)?;
    let panel_path = write_file(&opts.out_dir, "panel.csv", &panel.to_csv_string())?;
    let manifest = json!({
        "command": "simulate",
        "config_hash": cfg.hash(),
        "seed": seed,
        "units": units,
        "periods": periods,
        "model": {
            "num_states": model.num_states,
            "phi1": model.phi1,
            "phi2": model.phi2,
            "mc": model.mc,
            "rc": model.rc,
            "beta": model.beta,
        },
        "panel_path": panel_path.display().to_string(),
        "records": panel.len(),
    });
    write_file(
        &opts.out_dir,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

pub fn cmd_estimate(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    let model = cfg.model()?;
    let data = load_panel(cfg, &model, opts)?;
    let fit = fit_zurcher(&model, &data.panel, &init_theta(cfg)?, &nfxp_options(cfg)?)?;
    println!(
        "estimated theta = (MC {:.6}, RC {:.6}) at beta {} on {} ({} records); gradient norm {:.2e}",
        fit.solution.theta_hat[0],
        fit.solution.theta_hat[1],
        model.beta,
        data.description,
        data.panel.len(),
        fit.solution.convergence.gradient_norm
    );
    write_file(&opts.out_dir, "solution.json", &fit.solution.to_json())?;
    Ok(())
}

fn fit_with_warm_start(
    model: &ZurcherConfig,
    panel: &PanelDataset,
    warm: &mut DVector<f64>,
    opts: &NfxpOptions,
) -> Result<ZurcherFit> {
    let fit = fit_zurcher(model, panel, warm, opts)?;
    *warm = fit.solution.theta_hat.clone();
    Ok(fit)
}

pub fn cmd_sensitivity(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    let base_model = cfg.model()?;
    let data = load_panel(cfg, &base_model, opts)?;
    let nfxp = nfxp_options(cfg)?;
    let betas = cfg
        .list_opt("sensitivity", "betas")?
        .unwrap_or_else(|| vec![base_model.beta]);
    let deltas = cfg
        .list_opt("sensitivity", "deltas")?
        .unwrap_or_else(|| vec![1e-4, 1e-3, 1e-2]);
    let ccp_state = cfg.usize_or("sensitivity", "ccp_state", base_model.num_states)?;
    let counterfactual = counterfactual_from(cfg, "sensitivity")?;
    let kinds = vec![
        TargetKind::ReplacementCost,
        TargetKind::MaintenanceCost,
        TargetKind::CounterfactualCcp { state: ccp_state },
        TargetKind::WelfareChange,
    ];

    // Optional warm start from a previously written solution file.
    let mut warm = init_theta(cfg)?;
    if let Some(rel) = cfg.str_opt("sensitivity", "solution")? {
        let path = cfg.resolve_path(&rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        warm = EstimationSolution::from_json(&text)?.theta_hat;
    }

    let mut rows: Vec<SensitivityRow> = Vec::new();
    let mut tidy: Vec<(f64, String, f64)> = Vec::new();
    let mut reports = Vec::new();
    for &beta in &betas {
        let model = base_model.with_beta(beta);
        let fit = fit_with_warm_start(&model, &data.panel, &mut warm, &nfxp)?;
        let sens = zurcher_sensitivity(&fit, &data.panel, &counterfactual)?;

        // Re-estimation oracle at each β − Δ, shared across targets.
        let mut truths: Vec<Vec<f64>> = Vec::with_capacity(deltas.len());
        for &delta in &deltas {
            truths.push(targets_at_beta(
                &base_model,
                &data.panel,
                beta - delta,
                &counterfactual,
                &kinds,
                &fit.solution.theta_hat,
                &nfxp,
            )?);
        }

        for (k, kind) in kinds.iter().enumerate() {
            let t = evaluate_target(&fit, &sens, *kind)?;
            let errors: Vec<f64> = deltas
                .iter()
                .zip(&truths)
                .map(|(&delta, truth)| {
                    let approx = t.value - t.derivative * delta;
                    100.0 * (approx - truth[k]) / truth[k]
                })
                .collect();
            rows.push(SensitivityRow {
                target: kind.name(),
                beta,
                estimate: t.value,
                elasticity: scalar_elasticity(t.derivative, t.value, beta),
                errors,
            });
            tidy.push((beta, kind.name(), t.value));
        }

        let el = sens
            .report
            .elasticities
            .clone()
            .unwrap_or_else(|| elasticity(&sens.report, &fit.solution.theta_hat, &[beta]));
        let semi = sens
            .report
            .semi_elasticities
            .clone()
            .unwrap_or_else(|| semi_elasticity(&sens.report, &[beta]));
        reports.push(json!({
            "beta": beta,
            "theta_hat": fit.solution.theta_hat.as_slice(),
            "objective": fit.solution.objective_value,
            "dtheta_dbeta": sens.report.dtheta_dgamma.as_slice(),
            "dv_dbeta": sens.report.dv_dgamma.as_slice(),
            "dlambda_dbeta": sens.report.dlambda_dgamma.as_slice(),
            "condition_number": sens.report.condition_number,
            "residual_norm": sens.report.residual_norm,
            "elasticities": el.to_json_value(),
            "semi_elasticities": semi.to_json_value(),
            "welfare_change": sens.welfare,
            "dwelfare_dbeta": sens.dwelfare_dbeta,
        }));
    }

    write_file(&opts.out_dir, "sensitivity.csv", &write_sensitivity_csv(&rows, &deltas))?;
    write_file(
        &opts.out_dir,
        "sensitivity.json",
        &serde_json::to_string_pretty(&json!({
            "config_hash": cfg.hash(),
            "data": data.description,
            "deltas": deltas,
            "runs": reports,
        }))
        .expect("report serializes"),
    )?;
    write_file(&opts.out_dir, "figure_estimates.csv", &write_tidy_csv(&tidy))?;
    Ok(())
}

pub fn cmd_bounds(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    let model = cfg.model()?;
    let data = load_panel(cfg, &model, opts)?;
    let nfxp = nfxp_options(cfg)?;
    let target_name = cfg.str_or("bounds", "target", "rc")?;
    let kind = TargetKind::parse(&target_name, model.num_states)?;
    let beta_lo = cfg.f64_or("bounds", "beta_lo", 0.7)?;
    let uppers = cfg
        .list_opt("bounds", "beta_uppers")?
        .unwrap_or_else(|| vec![0.9]);
    let method = match cfg.str_or("bounds", "method", "profile")?.as_str() {
        "profile" => BoundsMethod::Profile,
        "grid" => BoundsMethod::GridOracle {
            step: cfg.f64_or("bounds", "grid_step", 1e-3)?,
        },
        other => {
            return Err(Error::Domain(format!(
                "unknown bounds method {other:?} (expected \"profile\" or \"grid\")"
            )))
        }
    };
    let counterfactual = counterfactual_from(cfg, "bounds")?;

    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for &upper in &uppers {
        let result = if opts.threads > 1 {
            bounds_estimate_threaded(
                || target_profile_fn(&model, &data.panel, &counterfactual, kind, &nfxp),
                &kind.name(),
                (beta_lo, upper),
                method,
                opts.threads,
            )?
        } else {
            bounds_estimate(
                target_profile_fn(&model, &data.panel, &counterfactual, kind, &nfxp),
                &kind.name(),
                (beta_lo, upper),
                method,
            )?
        };
        println!(
            "bounds over [{beta_lo}, {upper}]: [{:.6}, {:.6}] at beta = ({:.4}, {:.4}) in {:.2}s",
            result.lower, result.upper, result.arg_lower, result.arg_upper, result.wall_time_s
        );
        rows.push(BoundsRow {
            target: result.target.clone(),
            upper_bound_beta: upper,
            bound_lo: result.lower,
            bound_hi: result.upper,
            wall_time_s: result.wall_time_s,
        });
        logs.push(json!({
            "upper_bound_beta": upper,
            "arg_lower": result.arg_lower,
            "arg_upper": result.arg_upper,
            "evaluations": result.evaluations,
        }));
    }
    write_file(&opts.out_dir, "bounds.csv", &write_bounds_csv(&rows))?;
    write_file(
        &opts.out_dir,
        "bounds.json",
        &serde_json::to_string_pretty(&json!({
            "config_hash": cfg.hash(),
            "target": kind.name(),
            "beta_lo": beta_lo,
            "runs": logs,
        }))
        .expect("bounds log serializes"),
    )?;
    Ok(())
}

pub fn cmd_monotone(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    let model = cfg.model()?;
    let data = load_panel(cfg, &model, opts)?;
    let ccps = ccp_logit_estimate(&data.panel)?;

    // Estimated replacement probabilities per state, for plotting.
    let mut ccp_rows = String::from("state,action,prob\n");
    for x in 1..=model.num_states {
        for a in 0..2 {
            ccp_rows.push_str(&format!("{x},{a},{}\n", ccps.prob(a, x)));
        }
    }
    write_file(&opts.out_dir, "ccp_by_state.csv", &ccp_rows)?;

    let (_, q1) = build_transitions(&model)?;
    let p_ref = ccps.action_column(1);
    let verdict = renewal_monotonicity_check(&p_ref, &q1, 1)?;
    let mut rows = Vec::new();
    for (a, per_state) in verdict.verdicts.iter().enumerate() {
        for (x, d) in per_state.iter().enumerate() {
            rows.push(VerdictRow {
                action: a,
                state: x + 1,
                direction: d.as_str().to_string(),
                certificate: verdict.certificate.name().to_string(),
            });
        }
    }

    // When the corollary cannot sign the paths, fall back to an explicit
    // grid scan and record the weaker certificate alongside.
    let indeterminate = verdict
        .verdicts
        .iter()
        .flatten()
        .any(|d| *d == Direction::Indeterminate);
    if indeterminate {
        let (grid_points, beta_max) = if cfg.bool_or("monotone", "full_resolution", false)? {
            (10_000, 0.9999)
        } else {
            (
                cfg.usize_or("monotone", "grid_points", 101)?,
                cfg.f64_or("monotone", "beta_max", 0.99)?,
            )
        };
        let (q0, q1) = build_transitions(&model)?;
        let scan = sign_scan_verdict(&p_ref, &q0, &q1, grid_points, beta_max)?;
        for (x, d) in scan.verdicts[0].iter().enumerate() {
            rows.push(VerdictRow {
                action: 0,
                state: x + 1,
                direction: d.as_str().to_string(),
                certificate: scan.certificate.name().to_string(),
            });
        }
    }
    write_file(&opts.out_dir, "monotonicity.csv", &write_verdict_csv(&rows))?;

    // Two-step estimates over a β grid (figure data).
    let grid_points = cfg.usize_or("monotone", "estimate_grid_points", 18)?;
    let beta_max = cfg.f64_or("monotone", "beta_max", 0.99)?;
    let mut tidy = Vec::new();
    for k in 0..grid_points {
        let beta = beta_max * (k + 1) as f64 / grid_points as f64;
        let theta = two_step_theta(&ccps, &model, beta)?;
        tidy.push((beta, "two_step_mc".to_string(), theta[0]));
        tidy.push((beta, "two_step_rc".to_string(), theta[1]));
    }
    write_file(&opts.out_dir, "figure_two_step.csv", &write_tidy_csv(&tidy))?;
    Ok(())
}

pub fn cmd_breakdown(cfg: &RunConfig, opts: &CliOptions) -> Result<()> {
    let model = cfg.model()?;
    let data = load_panel(cfg, &model, opts)?;
    let nfxp = nfxp_options(cfg)?;
    let target_name = cfg.str_or("breakdown", "target", "rc")?;
    let kind = TargetKind::parse(&target_name, model.num_states)?;
    let tau_star = cfg.f64_required("breakdown", "tau_star")?;
    let beta_lo = cfg.f64_or("breakdown", "beta_lo", 0.7)?;
    let beta_hi = cfg.f64_or("breakdown", "beta_hi", 0.9)?;
    let robust_if = match cfg.str_or("breakdown", "robust_if", "above")?.as_str() {
        "above" => RobustIf::AboveThreshold,
        "below" => RobustIf::BelowThreshold,
        other => {
            return Err(Error::Domain(format!(
                "unknown robust_if {other:?} (expected \"above\" or \"below\")"
            )))
        }
    };
    let monotone_certified = cfg.bool_or("breakdown", "monotone_certified", false)?;
    let grid_points = cfg.usize_or("breakdown", "grid_points", 101)?;
    let counterfactual = counterfactual_from(cfg, "breakdown")?;

    let outcome = breakdown_frontier(
        target_profile_fn(&model, &data.panel, &counterfactual, kind, &nfxp),
        tau_star,
        (beta_lo, beta_hi),
        robust_if,
        monotone_certified,
        grid_points,
    )?;
    let outcome_json = match &outcome {
        BreakdownOutcome::Frontier {
            gamma,
            tau_at_frontier,
            sign_changes,
        } => json!({
            "kind": "frontier",
            "gamma": gamma,
            "tau_at_frontier": tau_at_frontier,
            "sign_changes": sign_changes,
        }),
        BreakdownOutcome::WholeIntervalRobust => json!({"kind": "whole_interval_robust"}),
        BreakdownOutcome::WholeIntervalNonRobust => json!({"kind": "whole_interval_non_robust"}),
    };
    write_file(
        &opts.out_dir,
        "breakdown.json",
        &serde_json::to_string_pretty(&json!({
            "config_hash": cfg.hash(),
            "target": kind.name(),
            "tau_star": tau_star,
            "beta_lo": beta_lo,
            "beta_hi": beta_hi,
            "robust_if": if robust_if == RobustIf::AboveThreshold { "above" } else { "below" },
            "outcome": outcome_json,
        }))
        .expect("breakdown serializes"),
    )?;
    Ok(())
}
