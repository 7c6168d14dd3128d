//! Property tests for the model-agnostic machinery: contraction, CCP
//! structure, shift invariance, and inversion round-trips on randomly
//! generated models.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use ddc_sense::dp_core::{
    bellman_apply, ccp_from_values, ccp_to_utilities, hotz_miller_csv, log_likelihood,
    solve_value_function, CcpMatrix, DdcModel, FixedPointOptions, PanelDataset, Record,
    ValueVector,
};

fn sup(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Row-stochastic matrix from raw positive weights.
fn stochastic_from(weights: &[f64], n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    for x in 0..n {
        let row = &weights[x * n..(x + 1) * n];
        let sum: f64 = row.iter().sum();
        let mut partial = 0.0;
        for y in 0..n - 1 {
            q[(x, y)] = row[y] / sum;
            partial += q[(x, y)];
        }
        q[(x, n - 1)] = 1.0 - partial;
    }
    q
}

/// A random model: n states, two or three actions, tabulated utilities.
fn arb_model() -> impl Strategy<Value = (DdcModel, Vec<f64>)> {
    (2usize..6, 2usize..4, 0.0f64..0.95).prop_flat_map(|(n, a, beta)| {
        let weights = proptest::collection::vec(0.05f64..1.0, a * n * n);
        let utils = proptest::collection::vec(-3.0f64..3.0, a * n);
        (weights, utils).prop_map(move |(w, u)| {
            let transitions: Vec<DMatrix<f64>> = (0..a)
                .map(|k| stochastic_from(&w[k * n * n..(k + 1) * n * n], n))
                .collect();
            let table = u.clone();
            let n_copy = n;
            let model = DdcModel::new(
                transitions,
                beta,
                0,
                Arc::new(move |_t: &[f64], action, state| table[action * n_copy + state - 1]),
                Arc::new(|_t: &[f64], _a, _x| vec![]),
            )
            .unwrap();
            (model, u)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The Bellman operator is a β-contraction in the sup norm.
    #[test]
    fn bellman_operator_is_a_contraction(
        (model, _utils) in arb_model(),
        v1_raw in proptest::collection::vec(-10.0f64..10.0, 6),
        v2_raw in proptest::collection::vec(-10.0f64..10.0, 6),
    ) {
        let n = model.num_states();
        let v1 = ValueVector::new(DVector::from_iterator(n, v1_raw[..n].iter().copied())).unwrap();
        let v2 = ValueVector::new(DVector::from_iterator(n, v2_raw[..n].iter().copied())).unwrap();
        let psi1 = bellman_apply(&model, &[], &v1).unwrap();
        let psi2 = bellman_apply(&model, &[], &v2).unwrap();
        let lhs = sup(&(psi1.values() - psi2.values()));
        let rhs = model.beta() * sup(&(v1.values() - v2.values()));
        prop_assert!(lhs <= rhs + 1e-12, "contraction violated: {lhs} > {rhs}");
    }

    /// CCP rows are interior probability vectors summing to one.
    #[test]
    fn ccps_are_interior_and_row_stochastic(
        (model, _utils) in arb_model(),
        v_raw in proptest::collection::vec(-5.0f64..5.0, 6),
    ) {
        let n = model.num_states();
        let v = ValueVector::new(DVector::from_iterator(n, v_raw[..n].iter().copied())).unwrap();
        let p = ccp_from_values(&model, &[], &v).unwrap();
        for x in 1..=n {
            let row_sum: f64 = (0..model.num_actions()).map(|a| p.prob(a, x)).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12);
            for a in 0..model.num_actions() {
                prop_assert!(p.prob(a, x) > 0.0 && p.prob(a, x) < 1.0);
            }
        }
    }

    /// Adding a constant to every choice-specific value at one state adds
    /// that constant to V(x) and leaves the choice probabilities alone.
    #[test]
    fn log_sum_exp_shift_invariance(
        (model, utils) in arb_model(),
        v_raw in proptest::collection::vec(-5.0f64..5.0, 6),
        shift in -4.0f64..4.0,
        state_pick in 0usize..6,
    ) {
        let n = model.num_states();
        let a_count = model.num_actions();
        let x0 = state_pick % n + 1;
        let v = ValueVector::new(DVector::from_iterator(n, v_raw[..n].iter().copied())).unwrap();

        let table = utils.clone();
        let shifted = DdcModel::new(
            model.transitions().to_vec(),
            model.beta(),
            0,
            Arc::new(move |_t: &[f64], action, state| {
                let base = table[action * n + state - 1];
                if state == x0 { base + shift } else { base }
            }),
            Arc::new(|_t: &[f64], _a, _x| vec![]),
        ).unwrap();

        let base_v = bellman_apply(&model, &[], &v).unwrap();
        let shifted_v = bellman_apply(&shifted, &[], &v).unwrap();
        for x in 1..=n {
            let expected = if x == x0 { base_v.at(x) + shift } else { base_v.at(x) };
            prop_assert!((shifted_v.at(x) - expected).abs() <= 1e-12);
        }

        let base_p = ccp_from_values(&model, &[], &v).unwrap();
        let shifted_p = ccp_from_values(&shifted, &[], &v).unwrap();
        for x in 1..=n {
            for a in 0..a_count {
                prop_assert!((base_p.prob(a, x) - shifted_p.prob(a, x)).abs() <= 1e-12);
            }
        }
    }

    /// Reordering records never moves the likelihood.
    #[test]
    fn likelihood_is_permutation_invariant(
        (model, _utils) in arb_model(),
        raw in proptest::collection::vec((0usize..6, 0usize..4), 1..40),
    ) {
        let n = model.num_states();
        let a_count = model.num_actions();
        let forward: Vec<Record> = raw.iter().enumerate().map(|(i, (s, a))| Record {
            unit: 1,
            period: (i + 1) as u64,
            state: s % n + 1,
            action: a % a_count,
        }).collect();
        let mut reversed: Vec<Record> = forward.iter().rev().cloned().collect();
        for (i, r) in reversed.iter_mut().enumerate() {
            r.period = (i + 1) as u64;
        }
        let data_f = PanelDataset::new(forward, n, a_count).unwrap();
        let data_r = PanelDataset::new(reversed, n, a_count).unwrap();
        let v = ValueVector::zeros(n);
        let lf = log_likelihood(&model, &[], &v, &data_f).unwrap();
        let lr = log_likelihood(&model, &[], &v, &data_r).unwrap();
        prop_assert!((lf - lr).abs() <= 1e-12);
    }

    /// Value differences from the inversion reproduce the CCPs through a
    /// softmax.
    #[test]
    fn hotz_miller_roundtrip(
        raw in proptest::collection::vec(0.05f64..1.0, 12),
    ) {
        let n = 4;
        let a_count = 3;
        let mut probs = DMatrix::zeros(n, a_count);
        for x in 0..n {
            let row = &raw[x * a_count..(x + 1) * a_count];
            let sum: f64 = row.iter().sum();
            let mut partial = 0.0;
            for a in 0..a_count - 1 {
                probs[(x, a)] = row[a] / sum;
                partial += probs[(x, a)];
            }
            probs[(x, a_count - 1)] = 1.0 - partial;
        }
        let p = CcpMatrix::new(probs).unwrap();
        let csv = hotz_miller_csv(&p);
        for x in 0..n {
            let denom: f64 = (0..a_count).map(|a| csv[(x, a)].exp()).sum();
            for a in 0..a_count {
                let back = csv[(x, a)].exp() / denom;
                prop_assert!((back - p.probs()[(x, a)]).abs() <= 1e-12);
            }
        }
    }

    /// Forward-solve then invert: models with the last action's utility
    /// normalized to zero are recovered exactly from their own CCPs.
    #[test]
    fn ccp_inversion_recovers_normalized_utilities(
        (model, utils) in arb_model(),
    ) {
        let n = model.num_states();
        let a_count = model.num_actions();
        // Re-normalize the reference action's utility to zero.
        let table = utils.clone();
        let normalized = DdcModel::new(
            model.transitions().to_vec(),
            model.beta(),
            0,
            Arc::new(move |_t: &[f64], action, state| {
                if action == a_count - 1 { 0.0 } else { table[action * n + state - 1] }
            }),
            Arc::new(|_t: &[f64], _a, _x| vec![]),
        ).unwrap();
        let v = solve_value_function(&normalized, &[], &FixedPointOptions::default()).unwrap();
        let p = ccp_from_values(&normalized, &[], &v).unwrap();
        let recovered = ccp_to_utilities(&p, normalized.transitions(), normalized.beta()).unwrap();
        for (a, pi_a) in recovered.iter().enumerate() {
            for x in 1..=n {
                let truth = normalized.utility(&[], a, x);
                prop_assert!(
                    (pi_a[x - 1] - truth).abs() <= 1e-8,
                    "action {a} state {x}: {} vs {truth}",
                    pi_a[x - 1]
                );
            }
        }
    }
}

/// A named solver instance: ten mileage states, θ = (0.05, 5), β = 0.95.
/// The fixed point meets its residual target, the operator contracts at
/// rate β on random pairs, and the implied CCP rows are stochastic.
#[test]
fn ten_state_bus_model_solves_and_contracts() {
    use rand::Rng;
    use rand::SeedableRng;

    let cfg = ddc_sense::zurcher::ZurcherConfig {
        num_states: 10,
        phi1: 0.35,
        phi2: 0.1,
        mc: 0.05,
        rc: 5.0,
        beta: 0.95,
    };
    let model = cfg.model().unwrap();
    let theta = cfg.theta();
    let opts = FixedPointOptions::default();
    let v = solve_value_function(&model, theta.as_slice(), &opts).unwrap();
    let psi = bellman_apply(&model, theta.as_slice(), &v).unwrap();
    assert!((psi.values() - v.values()).amax() <= opts.tol);

    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
    for _ in 0..20 {
        let v1 = ValueVector::new(DVector::from_iterator(
            10,
            (0..10).map(|_| 20.0 * rng.gen::<f64>() - 10.0),
        ))
        .unwrap();
        let v2 = ValueVector::new(DVector::from_iterator(
            10,
            (0..10).map(|_| 20.0 * rng.gen::<f64>() - 10.0),
        ))
        .unwrap();
        let p1 = bellman_apply(&model, theta.as_slice(), &v1).unwrap();
        let p2 = bellman_apply(&model, theta.as_slice(), &v2).unwrap();
        let lhs = sup(&(p1.values() - p2.values()));
        let rhs = cfg.beta * sup(&(v1.values() - v2.values()));
        assert!(lhs <= rhs + 1e-12);
    }

    let p = ccp_from_values(&model, theta.as_slice(), &v).unwrap();
    for x in 1..=10 {
        let row: f64 = (0..2).map(|a| p.prob(a, x)).sum();
        assert!((row - 1.0).abs() <= 1e-12);
    }
}

/// The inversion round-trip at the spec's stated size bound.
#[test]
fn ccp_inversion_roundtrip_at_thirty_states() {
    let cfg = ddc_sense::zurcher::ZurcherConfig {
        num_states: 30,
        phi1: 0.3,
        phi2: 0.15,
        mc: 0.07,
        rc: 6.0,
        beta: 0.97,
    };
    let model = cfg.model().unwrap();
    let theta = cfg.theta();
    let v = solve_value_function(&model, theta.as_slice(), &FixedPointOptions::default()).unwrap();
    let p = ccp_from_values(&model, theta.as_slice(), &v).unwrap();
    let recovered = ccp_to_utilities(&p, model.transitions(), cfg.beta).unwrap();
    for x in 1..=30 {
        let truth = cfg.rc - cfg.mc * x as f64;
        assert!(
            (recovered[0][x - 1] - truth).abs() <= 1e-8,
            "state {x}: {} vs {truth}",
            recovered[0][x - 1]
        );
    }
}
