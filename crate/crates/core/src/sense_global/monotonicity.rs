//! Monotonicity certificates for CCP-implied utilities in the discount
//! factor.
//!
//! Three certificates of decreasing strength: the renewal-action check
//! (a single comparison of reference-action CCPs when that action resets
//! the state), the one-period-slope certificate (the constant slope
//! vector under one-period finite dependence), and a β-grid sign scan of
//! the general derivative. A failed certificate yields an indeterminate verdict; it
//! is never silently upgraded to a weaker certificate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::beta_derivative::{utility_beta_derivative, verify_finite_dependence};

/// Direction of a per-(action, state) utility path in β.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
    Constant,
    Indeterminate,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::NonDecreasing => "nondecreasing",
            Direction::NonIncreasing => "nonincreasing",
            Direction::Constant => "constant",
            Direction::Indeterminate => "indeterminate",
        }
    }
}

/// Which certificate produced a verdict, with the premise it checked.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    /// Reference action resets the state and `p_A(1)` bounds `p_A(x)`
    /// from one side.
    RenewalCorollary { premise: String },
    /// One-period finite dependence holds; the slope vector is constant
    /// in β, so its signs decide.
    OnePeriodSlope { premise: String },
    /// Grid evaluation of the general derivative.
    SignScan { grid_points: usize, beta_max: f64 },
}

impl Certificate {
    pub fn name(&self) -> &'static str {
        match self {
            Certificate::RenewalCorollary { .. } => "renewal-corollary",
            Certificate::OnePeriodSlope { .. } => "one-period-slope",
            Certificate::SignScan { .. } => "sign-scan",
        }
    }
}

/// Per-(action, state) verdicts under one certificate.
#[derive(Clone, Debug)]
pub struct MonotonicityVerdict {
    /// `verdicts[a]` is the per-state direction vector for action `a`
    /// (reference action excluded).
    pub verdicts: Vec<Vec<Direction>>,
    pub certificate: Certificate,
}

impl MonotonicityVerdict {
    fn uniform(num_actions: usize, num_states: usize, d: Direction, cert: Certificate) -> Self {
        Self {
            verdicts: vec![vec![d; num_states]; num_actions],
            certificate: cert,
        }
    }
}

fn is_reset_matrix(q: &DMatrix<f64>) -> bool {
    for x in 0..q.nrows() {
        for y in 0..q.ncols() {
            let expected = if y == 0 { 1.0 } else { 0.0 };
            if q[(x, y)] != expected {
                return false;
            }
        }
    }
    true
}

/// Renewal-action certificate: requires the reference transition to be
/// exactly the reset matrix and `p_A(1) > 0`. If `p_A(1) ≤ p_A(x)` for
/// all states, every non-reference utility is nondecreasing in β; with
/// `≥` it is nonincreasing; with equality throughout, constant. The
/// verdict applies jointly to all non-reference actions.
pub fn renewal_monotonicity_check(
    p_ref: &DVector<f64>,
    q_ref: &DMatrix<f64>,
    num_free_actions: usize,
) -> Result<MonotonicityVerdict> {
    if !is_reset_matrix(q_ref) {
        return Err(Error::Premise(
            "reference transition is not the reset matrix".into(),
        ));
    }
    if p_ref[0] <= 0.0 {
        return Err(Error::Premise("reference CCP at the reset state is zero".into()));
    }
    let n = p_ref.len();
    let first = p_ref[0];
    let all_geq = p_ref.iter().all(|&p| p >= first);
    let all_leq = p_ref.iter().all(|&p| p <= first);
    let premise = format!(
        "reset reference action; p_A(1) = {first:.6} vs range [{:.6}, {:.6}]",
        p_ref.min(),
        p_ref.max()
    );
    let direction = match (all_geq, all_leq) {
        (true, true) => Direction::Constant,
        (true, false) => Direction::NonDecreasing,
        (false, true) => Direction::NonIncreasing,
        (false, false) => Direction::Indeterminate,
    };
    Ok(MonotonicityVerdict::uniform(
        num_free_actions,
        n,
        direction,
        Certificate::RenewalCorollary { premise },
    ))
}

/// One-period-slope certificate for a single action: under the verified
/// ρ=1 premise the derivative is `(−Q_a + Q_A)(−log p_A)` at every β, so
/// each state's sign settles its direction outright.
pub fn one_period_slope_verdict(
    p_ref: &DVector<f64>,
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
) -> Result<MonotonicityVerdict> {
    if !verify_finite_dependence(q_a, q_ref, 1, 1e-10) {
        return Err(Error::Premise(
            "one-period finite dependence fails beyond 1e-10".into(),
        ));
    }
    let m = p_ref.map(|p| -p.ln());
    let slope = (q_ref - q_a) * m;
    let verdicts = slope
        .iter()
        .map(|&s| {
            if s.abs() <= 1e-12 {
                Direction::Constant
            } else if s > 0.0 {
                Direction::NonDecreasing
            } else {
                Direction::NonIncreasing
            }
        })
        .collect();
    Ok(MonotonicityVerdict {
        verdicts: vec![verdicts],
        certificate: Certificate::OnePeriodSlope {
            premise: "Q_a Q_A = Q_A Q_A within 1e-10".into(),
        },
    })
}

/// Grid sign scan of the general derivative for one action over
/// `β ∈ [0, beta_max]`. The fallback when no structural certificate
/// applies.
pub fn sign_scan_verdict(
    p_ref: &DVector<f64>,
    q_a: &DMatrix<f64>,
    q_ref: &DMatrix<f64>,
    grid_points: usize,
    beta_max: f64,
) -> Result<MonotonicityVerdict> {
    if grid_points < 2 || !(0.0..1.0).contains(&beta_max) {
        return Err(Error::Domain(format!(
            "sign scan needs at least 2 grid points and beta_max in [0,1); got {grid_points}, {beta_max}"
        )));
    }
    let n = p_ref.len();
    let tol = 1e-10;
    let mut any_pos = vec![false; n];
    let mut any_neg = vec![false; n];
    for k in 0..grid_points {
        let beta = beta_max * k as f64 / (grid_points - 1) as f64;
        let d = utility_beta_derivative(p_ref, q_a, q_ref, beta)?;
        for x in 0..n {
            if d[x] > tol {
                any_pos[x] = true;
            }
            if d[x] < -tol {
                any_neg[x] = true;
            }
        }
    }
    let verdicts = (0..n)
        .map(|x| match (any_pos[x], any_neg[x]) {
            (false, false) => Direction::Constant,
            (true, false) => Direction::NonDecreasing,
            (false, true) => Direction::NonIncreasing,
            (true, true) => Direction::Indeterminate,
        })
        .collect();
    Ok(MonotonicityVerdict {
        verdicts: vec![verdicts],
        certificate: Certificate::SignScan {
            grid_points,
            beta_max,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reset_matrix(n: usize) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(n, n);
        for x in 0..n {
            q[(x, 0)] = 1.0;
        }
        q
    }

    #[test]
    fn rising_reference_probabilities_certify_nondecreasing() {
        let p = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let v = renewal_monotonicity_check(&p, &reset_matrix(3), 1).unwrap();
        assert!(v.verdicts[0].iter().all(|d| *d == Direction::NonDecreasing));
        assert_eq!(v.certificate.name(), "renewal-corollary");
    }

    #[test]
    fn falling_reference_probabilities_certify_nonincreasing() {
        let p = DVector::from_vec(vec![0.5, 0.2, 0.1]);
        let v = renewal_monotonicity_check(&p, &reset_matrix(3), 1).unwrap();
        assert!(v.verdicts[0].iter().all(|d| *d == Direction::NonIncreasing));
    }

    #[test]
    fn non_extremal_reset_state_is_indeterminate_and_scan_resolves() {
        let p = DVector::from_vec(vec![0.2, 0.1, 0.3]);
        let q_ref = reset_matrix(3);
        let v = renewal_monotonicity_check(&p, &q_ref, 1).unwrap();
        assert!(v.verdicts[0].iter().all(|d| *d == Direction::Indeterminate));

        // The scan still classifies per state: with one-period dependence
        // the slope is constant, so no state can stay indeterminate.
        let q_a = DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 1.0],
        );
        let scan = sign_scan_verdict(&p, &q_a, &q_ref, 101, 0.99).unwrap();
        assert!(scan.verdicts[0]
            .iter()
            .all(|d| *d != Direction::Indeterminate));
        assert_eq!(scan.certificate.name(), "sign-scan");
    }

    #[test]
    fn non_reset_reference_is_a_premise_error() {
        let p = DVector::from_vec(vec![0.2, 0.3]);
        let q = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 1.0, 0.0]);
        assert!(matches!(
            renewal_monotonicity_check(&p, &q, 1),
            Err(Error::Premise(_))
        ));
    }

    #[test]
    fn constant_probabilities_are_constant() {
        let p = DVector::from_element(4, 0.25);
        let v = renewal_monotonicity_check(&p, &reset_matrix(4), 2).unwrap();
        assert!(v.verdicts.iter().flatten().all(|d| *d == Direction::Constant));
        assert_eq!(v.verdicts.len(), 2);
    }

    #[test]
    fn one_period_slope_signs_decide_per_state() {
        let q_ref = reset_matrix(3);
        let q_a = DMatrix::from_row_slice(
            3,
            3,
            &[0.6, 0.4, 0.0, 0.0, 0.6, 0.4, 0.0, 0.0, 1.0],
        );
        let p = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let v = one_period_slope_verdict(&p, &q_a, &q_ref).unwrap();
        // p rising means −log p falls with the state; moving mass off the
        // reset state makes each slope positive.
        assert!(v.verdicts[0].iter().all(|d| *d == Direction::NonDecreasing));
    }
}
