//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here goes through LU with partial pivoting; inverses are
//! only formed explicitly for condition-number estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::Singular(what))
}

/// Solves `A X = B` for a matrix right-hand side.
pub fn lu_solve_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    what: &'static str,
) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::Singular(what))
}

/// 1-norm condition number, `‖A‖₁ ‖A⁻¹‖₁`.
///
/// Returns `f64::INFINITY` when the matrix is numerically singular.
pub fn condition_number_1(a: &DMatrix<f64>) -> f64 {
    match a.clone().lu().try_inverse() {
        Some(inv) => norm_1(a) * norm_1(&inv),
        None => f64::INFINITY,
    }
}

fn norm_1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max absolute entry of a matrix.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Sup norm of a vector.
pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Pairwise (cascade) summation. Deterministic regardless of how the
/// caller later chunks work across threads, and more accurate than a
/// left-to-right fold on long inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Checks that every row of `q` is a probability vector: nonnegative
/// entries and row sums within `tol` of one.
pub fn check_row_stochastic(q: &DMatrix<f64>, tol: f64, what: &'static str) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::Dimension {
            what,
            expected: q.nrows(),
            found: q.ncols(),
        });
    }
    for x in 0..q.nrows() {
        let mut sum = 0.0;
        for y in 0..q.ncols() {
            let v = q[(x, y)];
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "{what}: row {} has invalid entry {v} at column {}",
                    x + 1,
                    y + 1
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::Domain(format!(
                "{what}: row {} sums to {sum:.17} (off by {:.3e})",
                x + 1,
                (sum - 1.0).abs()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_exact() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn lu_solve_roundtrip() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![5.0, 10.0]);
        let x = lu_solve(&a, &b, "test").unwrap();
        let r = &a * &x - &b;
        assert!(sup_norm(&r) < 1e-12);
    }

    #[test]
    fn singular_solve_errors() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(lu_solve(&a, &b, "test").is_err());
    }

    #[test]
    fn condition_number_of_identity_is_one() {
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((condition_number_1(&eye) - 1.0).abs() < 1e-14);
    }
}
