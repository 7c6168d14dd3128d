//! Bounds on a target functional over an interval of the fixed
//! parameter.
//!
//! Profiling: every evaluation of the target is a full inner
//! re-estimation at that γ, so each profiled point satisfies the
//! estimation first-order conditions by construction. The default method
//! seeds an adaptive grid and refines interior extrema by golden-section
//! search (the target need not be monotone); the grid-oracle method is an
//! exhaustive scan used as a verification baseline.

use std::time::Instant;

use crate::error::{Error, Result};

/// Search strategy over the interval.
#[derive(Clone, Copy, Debug)]
pub enum BoundsMethod {
    /// 21-point seed grid plus golden-section refinement of interior
    /// extrema.
    Profile,
    /// Exhaustive evaluation with the given γ step.
    GridOracle { step: f64 },
}

/// Extremal values of the target over the interval, with locations and
/// the full evaluation log.
#[derive(Clone, Debug)]
pub struct BoundsResult {
    pub target: String,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub lower: f64,
    pub upper: f64,
    pub arg_lower: f64,
    pub arg_upper: f64,
    /// `(γ, τ(γ))` pairs, merged in γ order.
    pub evaluations: Vec<(f64, f64)>,
    pub wall_time_s: f64,
}

impl BoundsResult {
    pub fn validate(&self) -> Result<()> {
        if self.lower > self.upper {
            return Err(Error::Inconsistency(format!(
                "bounds inverted: {} > {}",
                self.lower, self.upper
            )));
        }
        for arg in [self.arg_lower, self.arg_upper] {
            if arg < self.gamma_lo - 1e-12 || arg > self.gamma_hi + 1e-12 {
                return Err(Error::Inconsistency(format!(
                    "extremum location {arg} outside [{}, {}]",
                    self.gamma_lo, self.gamma_hi
                )));
            }
        }
        Ok(())
    }
}

struct Tracker {
    evals: Vec<(f64, f64)>,
    best_min: (f64, f64),
    best_max: (f64, f64),
}

impl Tracker {
    fn new() -> Self {
        Self {
            evals: Vec::new(),
            best_min: (f64::NAN, f64::INFINITY),
            best_max: (f64::NAN, f64::NEG_INFINITY),
        }
    }

    fn record(&mut self, gamma: f64, value: f64) {
        self.evals.push((gamma, value));
        if value < self.best_min.1 {
            self.best_min = (gamma, value);
        }
        if value > self.best_max.1 {
            self.best_max = (gamma, value);
        }
    }
}

fn eval_at(
    target: &mut impl FnMut(f64) -> Result<f64>,
    gamma: f64,
    tracker: &mut Tracker,
) -> Result<f64> {
    let value = target(gamma).map_err(|e| {
        Error::Domain(format!("target evaluation failed at gamma = {gamma}: {e}"))
    })?;
    tracker.record(gamma, value);
    Ok(value)
}

/// Computes bounds on `target` over `[gamma_lo, gamma_hi]`.
pub fn bounds_estimate(
    mut target: impl FnMut(f64) -> Result<f64>,
    name: &str,
    interval: (f64, f64),
    method: BoundsMethod,
) -> Result<BoundsResult> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "interval must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let start = Instant::now();
    let mut tracker = Tracker::new();

    match method {
        BoundsMethod::GridOracle { step } => {
            if step <= 0.0 {
                return Err(Error::Domain(format!("grid step must be positive, got {step}")));
            }
            let n = ((hi - lo) / step).ceil() as usize;
            for k in 0..=n {
                let gamma = (lo + k as f64 * step).min(hi);
                eval_at(&mut target, gamma, &mut tracker)?;
                if gamma >= hi {
                    break;
                }
            }
        }
        BoundsMethod::Profile => {
            const SEED_POINTS: usize = 21;
            let grid: Vec<f64> = (0..SEED_POINTS)
                .map(|k| lo + (hi - lo) * k as f64 / (SEED_POINTS - 1) as f64)
                .collect();
            let mut values = Vec::with_capacity(SEED_POINTS);
            for &g in &grid {
                values.push(eval_at(&mut target, g, &mut tracker)?);
            }
            // Refine each interior extremum within its bracketing triple.
            let tol = (hi - lo) * 1e-7;
            let (i_min, _) = values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty grid");
            if i_min > 0 && i_min + 1 < SEED_POINTS {
                golden_section(
                    &mut target,
                    grid[i_min - 1],
                    grid[i_min + 1],
                    tol,
                    false,
                    &mut tracker,
                )?;
            }
            let (i_max, _) = values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty grid");
            if i_max > 0 && i_max + 1 < SEED_POINTS {
                golden_section(
                    &mut target,
                    grid[i_max - 1],
                    grid[i_max + 1],
                    tol,
                    true,
                    &mut tracker,
                )?;
            }
        }
    }

    let mut evaluations = tracker.evals;
    evaluations.sort_by(|a, b| a.0.total_cmp(&b.0));
    let result = BoundsResult {
        target: name.to_string(),
        gamma_lo: lo,
        gamma_hi: hi,
        lower: tracker.best_min.1,
        upper: tracker.best_max.1,
        arg_lower: tracker.best_min.0,
        arg_upper: tracker.best_max.0,
        evaluations,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    result.validate()?;
    Ok(result)
}

fn golden_section(
    target: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    maximize: bool,
    tracker: &mut Tracker,
) -> Result<()> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = sign * eval_at(target, c, tracker)?;
    let mut fd = sign * eval_at(target, d, tracker)?;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = sign * eval_at(target, c, tracker)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = sign * eval_at(target, d, tracker)?;
        }
    }
    Ok(())
}

/// Parallel variant: evaluations at distinct γ run concurrently on
/// `threads` workers, each constructed from `make_target` (profiling
/// closures usually carry warm-start state, so each worker gets its
/// own). The evaluation log is merged deterministically in γ order.
pub fn bounds_estimate_threaded<F>(
    make_target: impl Fn() -> F + Sync,
    name: &str,
    interval: (f64, f64),
    method: BoundsMethod,
    threads: usize,
) -> Result<BoundsResult>
where
    F: FnMut(f64) -> Result<f64> + Send,
{
    if threads <= 1 {
        return bounds_estimate(make_target(), name, interval, method);
    }
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "interval must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let start = Instant::now();

    // The parallel phase covers the grid; profile refinement stays
    // sequential on top of the merged seed.
    let grid: Vec<f64> = match method {
        BoundsMethod::GridOracle { step } => {
            if step <= 0.0 {
                return Err(Error::Domain(format!("grid step must be positive, got {step}")));
            }
            let n = ((hi - lo) / step).ceil() as usize;
            let mut g: Vec<f64> = (0..=n).map(|k| (lo + k as f64 * step).min(hi)).collect();
            g.dedup();
            g
        }
        BoundsMethod::Profile => (0..21)
            .map(|k| lo + (hi - lo) * k as f64 / 20.0)
            .collect(),
    };

    let chunk = grid.len().div_ceil(threads);
    let mut results: Vec<Result<Vec<(f64, f64)>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|part| {
                let make = &make_target;
                scope.spawn(move || -> Result<Vec<(f64, f64)>> {
                    let mut f = make();
                    part.iter()
                        .map(|&g| {
                            f(g).map(|v| (g, v)).map_err(|e| {
                                Error::Domain(format!(
                                    "target evaluation failed at gamma = {g}: {e}"
                                ))
                            })
                        })
                        .collect()
                })
            })
            .collect();
        for h in handles {
            results.push(h.join().expect("worker panicked"));
        }
    });

    let mut tracker = Tracker::new();
    for part in results {
        for (g, v) in part? {
            tracker.record(g, v);
        }
    }

    if let BoundsMethod::Profile = method {
        // Sequential refinement of interior extrema.
        let mut target = make_target();
        let seed: Vec<(f64, f64)> = {
            let mut s = tracker.evals.clone();
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
            s
        };
        let tol = (hi - lo) * 1e-7;
        let i_min = seed
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .expect("nonempty grid");
        if i_min > 0 && i_min + 1 < seed.len() {
            golden_section(&mut target, seed[i_min - 1].0, seed[i_min + 1].0, tol, false, &mut tracker)?;
        }
        let i_max = seed
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .expect("nonempty grid");
        if i_max > 0 && i_max + 1 < seed.len() {
            golden_section(&mut target, seed[i_max - 1].0, seed[i_max + 1].0, tol, true, &mut tracker)?;
        }
    }

    let mut evaluations = tracker.evals;
    evaluations.sort_by(|a, b| a.0.total_cmp(&b.0));
    let result = BoundsResult {
        target: name.to_string(),
        gamma_lo: lo,
        gamma_hi: hi,
        lower: tracker.best_min.1,
        upper: tracker.best_max.1,
        arg_lower: tracker.best_min.0,
        arg_upper: tracker.best_max.0,
        evaluations,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    result.validate()?;
    Ok(result)
}
