//! Analytic derivatives of CCP-implied utilities with respect to the
//! discount factor.
//!
//! For `π_a(β) = (I − βQ_a)(I − βQ_A)⁻¹ m + log p_a` with
//! `m = π̄_A − log p_A` fixed (CCPs and transitions do not move with β),
//!
//! `∂π_a/∂β = −[Q_a(I − βQ_A)⁻¹ − (I − βQ_A)⁻¹ Q_A](I − βQ_A)⁻¹ m`,
//!
//! which two solves evaluate exactly since `(I − βQ_A)⁻¹` commutes with
//! `Q_A`. Under ρ-period finite dependence the resolvent telescopes into
//! a degree-(ρ−1) polynomial in `βQ_A`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lu_solve;

fn resolvent_solve(q_ref: &DMatrix<f64>, beta: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = q_ref.nrows();
    let lhs = DMatrix::<f64>::identity(n, n) - q_ref.scale(beta);
    lu_solve(&lhs, rhs, "discount-factor resolvent")
}

/// `∂π_a/∂β` under the `π_A = 0` normalization.
pub fn utility_beta_derivative(
    p_ref: &DVector<f64>,
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
    beta: f64,
) -> Result<DVector<f64>> {
    let m = p_ref.map(|p| -p.ln());
    kernel_derivative(&m, q_a, q_ref, beta)
}

/// `∂π_a/∂β` when the reference utility is normalized to `π̄_A` instead
/// of zero: the same kernel applied to `π̄_A − log p_A`.
pub fn normalized_utility_beta_derivative(
    p_ref: &DVector<f64>,
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
    beta: f64,
    pi_bar_ref: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = pi_bar_ref + p_ref.map(|p| -p.ln());
    kernel_derivative(&m, q_a, q_ref, beta)
}

fn kernel_derivative(
    m: &DVector<f64>,
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
    beta: f64,
) -> Result<DVector<f64>> {
    let w1 = resolvent_solve(q_ref, beta, m)?;
    let w2 = resolvent_solve(q_ref, beta, &w1)?;
    Ok(-(q_a * &w2 - q_ref * &w2))
}

/// Checks the ρ-period finite-dependence premise
/// `Q_a Q_A^ρ = Q_A Q_A^ρ` within `tol` (max-abs).
pub fn verify_finite_dependence(
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
    rho: usize,
    tol: f64,
) -> bool {
    let mut q_ref_pow = DMatrix::<f64>::identity(q_ref.nrows(), q_ref.ncols());
    for _ in 0..rho {
        q_ref_pow = q_ref * q_ref_pow;
    }
    ((q_a - q_ref) * q_ref_pow).amax() <= tol
}

/// `∂π_a/∂β` under verified ρ-period finite dependence:
/// `−(Q_a − Q_A)(I + βQ_A + ⋯ + β^{ρ−1}Q_A^{ρ−1})(I − βQ_A)⁻¹(−log p_A)`.
///
/// The premise is checked, not assumed; on violation the caller may fall
/// back to [`utility_beta_derivative`].
pub fn finite_dependence_derivative(
    p_ref: &DVector<f64>,
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
    beta: f64,
    rho: usize,
) -> Result<DVector<f64>> {
    if rho == 0 {
        return Err(Error::Domain("finite-dependence order must be positive".into()));
    }
    if !verify_finite_dependence(q_a, q_ref, rho, 1e-10) {
        return Err(Error::Premise(format!(
            "Q_a Q_A^{rho} != Q_A Q_A^{rho} beyond 1e-10"
        )));
    }
    let m = p_ref.map(|p| -p.ln());
    let w = resolvent_solve(q_ref, beta, &m)?;
    // s = Σ_{r=0}^{ρ−1} β^r Q_A^r w
    let mut term = w.clone();
    let mut s = w;
    let mut scale = 1.0;
    for _ in 1..rho {
        term = q_ref * term;
        scale *= beta;
        s += term.scale(scale);
    }
    Ok(-(q_a * &s - q_ref * &s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_stochastic(rng: &mut ChaCha12Rng, n: usize) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(n, n);
        for x in 0..n {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
            let sum: f64 = row.iter().sum();
            for v in &mut row {
                *v /= sum;
            }
            // Force the row to sum to one exactly in floating point.
            let partial: f64 = row[..n - 1].iter().sum();
            row[n - 1] = 1.0 - partial;
            for y in 0..n {
                q[(x, y)] = row[y];
            }
        }
        q
    }

    fn random_interior_probs(rng: &mut ChaCha12Rng, n: usize) -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|_| 0.05 + 0.9 * rng.gen::<f64>()))
    }

    #[test]
    fn beta_zero_reduces_to_the_transition_difference() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let q_a = random_stochastic(&mut rng, 5);
        let q_ref = random_stochastic(&mut rng, 5);
        let p_ref = random_interior_probs(&mut rng, 5);
        let d = utility_beta_derivative(&p_ref, &q_a, &q_ref, 0.0).unwrap();
        let m = p_ref.map(|p| -p.ln());
        let expected = -((&q_a - &q_ref) * m);
        assert!((d - expected).amax() < 1e-12);
    }

    #[test]
    fn constant_reference_probabilities_give_a_zero_derivative() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for beta in [0.0, 0.25, 0.5, 0.75] {
            let q_a = random_stochastic(&mut rng, 6);
            let q_ref = random_stochastic(&mut rng, 6);
            let p_ref = DVector::from_element(6, 0.37);
            let d = utility_beta_derivative(&p_ref, &q_a, &q_ref, beta).unwrap();
            assert!(d.amax() < 1e-12, "beta={beta}: {:.3e}", d.amax());
        }
    }

    #[test]
    fn matches_finite_differences_of_the_utility_map() {
        // FD oracle over the full (I−βQ_a)(I−βQ_A)⁻¹(−log p_A) map.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 8;
        let q_a = random_stochastic(&mut rng, n);
        let q_ref = random_stochastic(&mut rng, n);
        let p_ref = random_interior_probs(&mut rng, n);
        let beta = 0.85;
        let m = p_ref.map(|p: f64| -p.ln());

        let pi_at = |b: f64| -> DVector<f64> {
            let eye = DMatrix::<f64>::identity(n, n);
            let w = (&eye - q_ref.scale(b)).lu().solve(&m).unwrap();
            (&eye - q_a.scale(b)) * w
        };
        let h = 1e-6;
        let fd = (pi_at(beta + h) - pi_at(beta - h)).unscale(2.0 * h);
        let analytic = utility_beta_derivative(&p_ref, &q_a, &q_ref, beta).unwrap();
        assert!((analytic - fd).amax() < 1e-6);
    }

    #[test]
    fn normalized_variant_reduces_and_annihilates() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 5;
        let q_a = random_stochastic(&mut rng, n);
        let q_ref = random_stochastic(&mut rng, n);
        let p_ref = random_interior_probs(&mut rng, n);
        let beta = 0.6;

        let zero = DVector::zeros(n);
        let a = normalized_utility_beta_derivative(&p_ref, &q_a, &q_ref, beta, &zero).unwrap();
        let b = utility_beta_derivative(&p_ref, &q_a, &q_ref, beta).unwrap();
        assert!((a - b).amax() < 1e-15);

        // π̄_A = log p_A elementwise puts the kernel on the zero vector.
        let log_p = p_ref.map(|p| p.ln());
        let c =
            normalized_utility_beta_derivative(&p_ref, &q_a, &q_ref, beta, &log_p).unwrap();
        assert!(c.amax() < 1e-15);
    }

    #[test]
    fn finite_dependence_premise_is_enforced() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let q_a = random_stochastic(&mut rng, 4);
        let q_ref = random_stochastic(&mut rng, 4);
        let p_ref = random_interior_probs(&mut rng, 4);
        // Generic random matrices almost surely violate the premise.
        match finite_dependence_derivative(&p_ref, &q_a, &q_ref, 0.5, 1) {
            Err(Error::Premise(_)) => {}
            other => panic!("expected premise error, got {other:?}"),
        }
    }

    #[test]
    fn renewal_transitions_satisfy_the_one_period_premise() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let n = 5;
        let q_a = random_stochastic(&mut rng, n);
        let mut q_ref = DMatrix::zeros(n, n);
        for x in 0..n {
            q_ref[(x, 0)] = 1.0;
        }
        assert!(verify_finite_dependence(&q_a, &q_ref, 1, 1e-13));
        let p_ref = random_interior_probs(&mut rng, n);
        let beta = 0.8;
        let fd1 = finite_dependence_derivative(&p_ref, &q_a, &q_ref, beta, 1).unwrap();
        // Under the premise the general formula collapses to the same value.
        let general = utility_beta_derivative(&p_ref, &q_a, &q_ref, beta).unwrap();
        assert!((&fd1 - &general).amax() < 1e-10);
        // And matches the closed form (−Q_a + Q_A)(−log p_A).
        let m = p_ref.map(|p: f64| -p.ln());
        let closed = (q_ref.clone() - q_a.clone()) * m;
        assert!((&fd1 - &closed).amax() < 1e-10);
    }
}
