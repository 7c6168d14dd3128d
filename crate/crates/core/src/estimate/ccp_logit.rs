//! First-stage CCP estimation by logistic regression on polynomial state
//! features.
//!
//! Actions other than the reference (the last one) get a one-vs-reference
//! linear predictor in `(1, x, x², …)`; the binary case is exactly a
//! logistic regression of the action on the state and its square at the
//! default degree.

use nalgebra::{DMatrix, DVector};

use crate::dp_core::{CcpMatrix, PanelDataset};
use crate::error::{Error, Result};
use crate::linalg::lu_solve;

/// Degree-2 fit, the default specification.
pub fn ccp_logit_estimate(data: &PanelDataset) -> Result<CcpMatrix> {
    ccp_logit_estimate_with_degree(data, 2)
}

/// Fits CCPs at every state `1..=X` by multinomial logit with
/// `(1, x, …, x^degree)` features (states rescaled to `[0, 1]` internally
/// for conditioning; fitted probabilities are invariant to that).
pub fn ccp_logit_estimate_with_degree(data: &PanelDataset, degree: usize) -> Result<CcpMatrix> {
    if data.is_empty() {
        return Err(Error::Domain("cannot fit CCPs from an empty panel".into()));
    }
    let x_dim = data.num_states();
    let n_act = data.num_actions();
    if n_act < 2 {
        return Err(Error::Domain("need at least two actions".into()));
    }
    let n_feat = degree + 1;
    let n_free = n_act - 1; // last action is the reference
    let dim = n_free * n_feat;

    let counts = data.counts();
    let features: Vec<DVector<f64>> = (1..=x_dim)
        .map(|x| {
            let t = x as f64 / x_dim as f64;
            DVector::from_iterator(n_feat, (0..n_feat).map(|d| t.powi(d as i32)))
        })
        .collect();

    let mut coef = DVector::<f64>::zeros(dim);
    let total = counts.total();
    let tol = 1e-10 * total.max(1.0);

    for iter in 0..200 {
        // Linear predictors and fitted probabilities per state.
        let probs = fitted_probs(&coef, &features, n_free, n_feat, x_dim)?;

        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for x in 1..=x_dim {
            let n_x = counts.state_total(x);
            if n_x == 0.0 {
                continue;
            }
            let z = &features[x - 1];
            for a in 0..n_free {
                let resid = counts.at(x, a) - n_x * probs[(x - 1, a)];
                for i in 0..n_feat {
                    grad[a * n_feat + i] += resid * z[i];
                }
                for b in 0..n_free {
                    let w = if a == b {
                        probs[(x - 1, a)] * (1.0 - probs[(x - 1, a)])
                    } else {
                        -probs[(x - 1, a)] * probs[(x - 1, b)]
                    };
                    for i in 0..n_feat {
                        for j in 0..n_feat {
                            hess[(a * n_feat + i, b * n_feat + j)] -= n_x * w * z[i] * z[j];
                        }
                    }
                }
            }
        }

        if grad.amax() <= tol {
            return CcpMatrix::new(probs);
        }
        let step = lu_solve(&(-hess), &grad, "ccp logit Newton step")?;
        coef += step;

        // Diverging coefficients mean some state region is perfectly
        // separated and the MLE does not exist.
        if coef.amax() > 200.0 || iter == 199 {
            return Err(Error::Separation);
        }
    }
    Err(Error::Separation)
}

fn fitted_probs(
    coef: &DVector<f64>,
    features: &[DVector<f64>],
    n_free: usize,
    n_feat: usize,
    x_dim: usize,
) -> Result<DMatrix<f64>> {
    let mut probs = DMatrix::<f64>::zeros(x_dim, n_free + 1);
    for x in 0..x_dim {
        let z = &features[x];
        let mut denom = 1.0;
        for a in 0..n_free {
            let eta: f64 = (0..n_feat).map(|i| coef[a * n_feat + i] * z[i]).sum();
            let e = eta.exp();
            if !e.is_finite() {
                return Err(Error::Separation);
            }
            probs[(x, a)] = e;
            denom += e;
        }
        for a in 0..n_free {
            probs[(x, a)] /= denom;
        }
        probs[(x, n_free)] = 1.0 / denom;
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_core::Record;
    use crate::zurcher::{simulate_panel, ZurcherConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn constant_probability_yields_a_flat_fit() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let x_dim = 10;
        let mut records = Vec::new();
        for unit in 1..=400u64 {
            for period in 1..=50u64 {
                let state = rng.gen_range(1..=x_dim);
                let action = usize::from(rng.gen::<f64>() < 0.3);
                records.push(Record { unit, period, state, action });
            }
        }
        let data = PanelDataset::new(records, x_dim, 2).unwrap();
        let p = ccp_logit_estimate(&data).unwrap();
        for x in 1..=x_dim {
            assert!((p.prob(1, x) - 0.3).abs() < 0.02, "state {x}: {}", p.prob(1, x));
        }
        // Flat means nearly no variation across states.
        let spread = (1..=x_dim)
            .map(|x| p.prob(1, x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        assert!(spread.1 - spread.0 < 0.03);
    }

    #[test]
    fn zero_coefficients_mean_one_half() {
        // Implied by the link function; checked through a symmetric sample.
        let mut records = Vec::new();
        let mut period = 1;
        for state in 1..=5usize {
            for action in [0usize, 1] {
                records.push(Record { unit: 1, period, state, action });
                period += 1;
            }
        }
        let data = PanelDataset::new(records, 5, 2).unwrap();
        let p = ccp_logit_estimate(&data).unwrap();
        for x in 1..=5 {
            assert!((p.prob(1, x) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn replacement_fit_is_monotone_on_simulated_data() {
        let cfg = ZurcherConfig {
            num_states: 12,
            ..ZurcherConfig::desk_scale()
        };
        let panel = simulate_panel(&cfg, 80, 400, 5).unwrap();
        let p = ccp_logit_estimate(&panel).unwrap();
        for x in 1..12 {
            assert!(
                p.prob(1, x + 1) > p.prob(1, x),
                "fit not monotone at state {x}"
            );
        }
    }

    #[test]
    fn three_action_fit_recovers_the_generating_probabilities() {
        // One-vs-reference multinomial with state-dependent predictors.
        let x_dim = 8usize;
        let eta = |a: usize, x: usize| -> f64 {
            let t = x as f64 / x_dim as f64;
            match a {
                0 => 0.5 - 1.2 * t,
                1 => -0.4 + 0.9 * t,
                _ => 0.0,
            }
        };
        let probs_at = |x: usize| -> [f64; 3] {
            let e: Vec<f64> = (0..3).map(|a| eta(a, x).exp()).collect();
            let denom: f64 = e.iter().sum();
            [e[0] / denom, e[1] / denom, e[2] / denom]
        };

        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut records = Vec::new();
        for unit in 1..=600u64 {
            for period in 1..=40u64 {
                let state = rng.gen_range(1..=x_dim);
                let p = probs_at(state);
                let u: f64 = rng.gen();
                let action = if u < p[0] {
                    0
                } else if u < p[0] + p[1] {
                    1
                } else {
                    2
                };
                records.push(Record { unit, period, state, action });
            }
        }
        let data = PanelDataset::new(records, x_dim, 3).unwrap();
        let fitted = ccp_logit_estimate(&data).unwrap();
        for x in 1..=x_dim {
            let truth = probs_at(x);
            for a in 0..3 {
                assert!(
                    (fitted.prob(a, x) - truth[a]).abs() < 0.02,
                    "action {a} state {x}: fitted {} vs truth {}",
                    fitted.prob(a, x),
                    truth[a]
                );
            }
        }
    }

    #[test]
    fn perfect_separation_is_reported() {
        // Deterministic rule: replace exactly when x > 3.
        let mut records = Vec::new();
        let mut period = 1;
        for rep in 0..40 {
            for state in 1..=6usize {
                records.push(Record {
                    unit: 1,
                    period,
                    state,
                    action: usize::from(state > 3),
                });
                period += 1;
                let _ = rep;
            }
        }
        let data = PanelDataset::new(records, 6, 2).unwrap();
        assert!(matches!(ccp_logit_estimate(&data), Err(Error::Separation)));
    }
}
