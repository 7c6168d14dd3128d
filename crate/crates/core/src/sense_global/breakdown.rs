//! Breakdown-frontier search: where does a threshold conclusion about
//! the target stop holding as the fixed parameter moves?

use crate::error::{Error, Result};

/// The direction of the conclusion defining the robust region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobustIf {
    /// Robust region is `{γ : τ(γ) ≥ τ*}`.
    AboveThreshold,
    /// Robust region is `{γ : τ(γ) ≤ τ*}`.
    BelowThreshold,
}

/// Result of the frontier search.
#[derive(Clone, Debug)]
pub enum BreakdownOutcome {
    /// A crossing: the conclusion flips at `gamma`.
    Frontier {
        gamma: f64,
        tau_at_frontier: f64,
        /// Sign changes seen on the scan grid; more than one means the
        /// robust region is not an interval and the reported frontier is
        /// only the first crossing.
        sign_changes: usize,
    },
    /// The conclusion holds on the whole interval.
    WholeIntervalRobust,
    /// The conclusion fails on the whole interval.
    WholeIntervalNonRobust,
}

/// Finds the breakdown frontier of `τ(γ) vs τ*` over the interval.
///
/// With `monotone_certified` (from a monotonicity certificate) the
/// frontier comes from bisection to `|τ(γ*) − τ*| ≤ 1e-6·(1 + |τ*|)`;
/// otherwise a `grid_points` scan locates sign changes and the first is
/// refined, with the count reported for multiplicity warnings. Endpoints
/// that do not straddle the threshold yield a degenerate verdict rather
/// than an error.
pub fn breakdown_frontier(
    mut target: impl FnMut(f64) -> Result<f64>,
    tau_star: f64,
    interval: (f64, f64),
    robust_if: RobustIf,
    monotone_certified: bool,
    grid_points: usize,
) -> Result<BreakdownOutcome> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "interval must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    // Work with h(γ) = τ(γ) − τ*; the robust sign is +1 for ≥, −1 for ≤.
    let robust_sign = match robust_if {
        RobustIf::AboveThreshold => 1.0,
        RobustIf::BelowThreshold => -1.0,
    };
    let mut h = |g: f64| -> Result<f64> { Ok((target(g)? - tau_star) * robust_sign) };

    let h_lo = h(lo)?;
    let h_hi = h(hi)?;
    if h_lo >= 0.0 && h_hi >= 0.0 && monotone_certified {
        return Ok(BreakdownOutcome::WholeIntervalRobust);
    }
    if h_lo < 0.0 && h_hi < 0.0 && monotone_certified {
        return Ok(BreakdownOutcome::WholeIntervalNonRobust);
    }

    let value_tol = 1e-6 * (1.0 + tau_star.abs());

    if monotone_certified {
        let (mut a, mut b, mut ha) = (lo, hi, h_lo);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let hm = h(mid)?;
            if hm.abs() <= value_tol || (b - a) < 4.0 * f64::EPSILON * (1.0 + mid.abs()) {
                return Ok(BreakdownOutcome::Frontier {
                    gamma: mid,
                    tau_at_frontier: hm * robust_sign + tau_star,
                    sign_changes: 1,
                });
            }
            if (ha >= 0.0) == (hm >= 0.0) {
                a = mid;
                ha = hm;
            } else {
                b = mid;
            }
        }
        return Err(Error::Convergence {
            iterations: 200,
            residual: value_tol,
        });
    }

    // Grid scan for sign changes.
    if grid_points < 2 {
        return Err(Error::Domain(format!(
            "grid scan needs at least 2 points, got {grid_points}"
        )));
    }
    let mut values = Vec::with_capacity(grid_points);
    for k in 0..grid_points {
        let g = lo + (hi - lo) * k as f64 / (grid_points - 1) as f64;
        values.push((g, h(g)?));
    }
    let mut crossings = Vec::new();
    for w in values.windows(2) {
        if (w[0].1 >= 0.0) != (w[1].1 >= 0.0) {
            crossings.push((w[0].0, w[1].0, w[0].1));
        }
    }
    if crossings.is_empty() {
        return Ok(if values[0].1 >= 0.0 {
            BreakdownOutcome::WholeIntervalRobust
        } else {
            BreakdownOutcome::WholeIntervalNonRobust
        });
    }
    // Refine the first crossing by bisection within its cell.
    let (mut a, mut b, mut ha) = crossings[0];
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let hm = h(mid)?;
        if hm.abs() <= value_tol || (b - a) < 4.0 * f64::EPSILON * (1.0 + mid.abs()) {
            return Ok(BreakdownOutcome::Frontier {
                gamma: mid,
                tau_at_frontier: hm * robust_sign + tau_star,
                sign_changes: crossings.len(),
            });
        }
        if (ha >= 0.0) == (hm >= 0.0) {
            a = mid;
            ha = hm;
        } else {
            b = mid;
        }
    }
    Err(Error::Convergence {
        iterations: 200,
        residual: value_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_target_crosses_at_the_threshold() {
        let out = breakdown_frontier(Ok, 0.5, (0.0, 1.0), RobustIf::AboveThreshold, true, 0)
            .unwrap();
        match out {
            BreakdownOutcome::Frontier { gamma, .. } => assert!((gamma - 0.5).abs() < 1e-6),
            other => panic!("expected frontier, got {other:?}"),
        }
    }

    #[test]
    fn always_above_is_whole_interval_robust() {
        let out = breakdown_frontier(
            |g| Ok(2.0 + g),
            0.5,
            (0.0, 1.0),
            RobustIf::AboveThreshold,
            true,
            0,
        )
        .unwrap();
        assert!(matches!(out, BreakdownOutcome::WholeIntervalRobust));
    }

    #[test]
    fn always_below_is_whole_interval_non_robust() {
        let out = breakdown_frontier(
            |g| Ok(g - 5.0),
            0.5,
            (0.0, 1.0),
            RobustIf::AboveThreshold,
            true,
            0,
        )
        .unwrap();
        assert!(matches!(out, BreakdownOutcome::WholeIntervalNonRobust));
    }

    #[test]
    fn below_threshold_direction_flips_the_region() {
        let out = breakdown_frontier(
            Ok,
            0.5,
            (0.0, 1.0),
            RobustIf::BelowThreshold,
            true,
            0,
        )
        .unwrap();
        match out {
            BreakdownOutcome::Frontier { gamma, .. } => assert!((gamma - 0.5).abs() < 1e-6),
            other => panic!("expected frontier, got {other:?}"),
        }
    }

    #[test]
    fn grid_scan_reports_multiple_crossings() {
        // sin(2πγ) crosses 0 at 0.5 inside (0, 1) and touches sign
        // changes twice over a wider stretch.
        let out = breakdown_frontier(
            |g| Ok((2.0 * std::f64::consts::PI * g).sin()),
            0.0,
            (0.1, 0.9),
            RobustIf::AboveThreshold,
            false,
            101,
        )
        .unwrap();
        match out {
            BreakdownOutcome::Frontier { gamma, sign_changes, .. } => {
                assert!((gamma - 0.5).abs() < 1e-5);
                assert_eq!(sign_changes, 1);
            }
            other => panic!("expected frontier, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_multiplicity_is_counted() {
        // h = cos(4πγ): several crossings in (0, 1).
        let out = breakdown_frontier(
            |g| Ok((4.0 * std::f64::consts::PI * g).cos()),
            0.0,
            (0.0, 1.0),
            RobustIf::AboveThreshold,
            false,
            201,
        )
        .unwrap();
        match out {
            BreakdownOutcome::Frontier { sign_changes, .. } => assert!(sign_changes > 1),
            other => panic!("expected frontier, got {other:?}"),
        }
    }
}
