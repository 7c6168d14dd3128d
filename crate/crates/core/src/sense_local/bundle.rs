//! The derivative bundle: every second-derivative block the sensitivity
//! system needs, assembled either from analytic formulas or by central
//! finite differences around the stored optimum.
//!
//! Vec-Jacobian layout (column-stacking convention): for a constraint map
//! `F: (θ, V, γ) → R^{d_V}`, the matrix `vec[(∂F/∂x')']` stacks the
//! per-equation gradients, so row `y·d_x + k` is `∂F(y)/∂x_k`, and its
//! Jacobian with respect to `z` has entry `(y·d_x + k, j) = ∂²F(y)/∂x_k ∂z_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::zurcher::DerivativeBank;

/// A stationary point of the constrained problem together with its
/// multiplier, the anchor for numeric differentiation.
#[derive(Clone, Debug)]
pub struct SensePoint {
    pub theta: DVector<f64>,
    pub v: DVector<f64>,
    pub gamma: DVector<f64>,
    pub lambda: DVector<f64>,
}

/// All derivative blocks of `(L, F)` at the optimum, plus the multiplier.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    pub l_tt: DMatrix<f64>,
    pub l_tv: DMatrix<f64>,
    pub l_vv: DMatrix<f64>,
    pub l_tg: DMatrix<f64>,
    pub l_vg: DMatrix<f64>,
    pub f_t: DMatrix<f64>,
    pub f_v: DMatrix<f64>,
    pub f_g: DMatrix<f64>,
    pub vec_f_t_by_t: DMatrix<f64>,
    pub vec_f_t_by_v: DMatrix<f64>,
    pub vec_f_t_by_g: DMatrix<f64>,
    pub vec_f_v_by_t: DMatrix<f64>,
    pub vec_f_v_by_v: DMatrix<f64>,
    pub vec_f_v_by_g: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl DerivativeBundle {
    /// `(d_θ, d_V, d_γ)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l_tt.nrows(), self.l_vv.nrows(), self.l_tg.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        let (dt, dv, dg) = self.dims();
        let expect = |cond: bool, what: &'static str, expected: usize, found: usize| {
            if cond {
                Ok(())
            } else {
                Err(Error::Dimension { what, expected, found })
            }
        };
        expect(self.l_tt.ncols() == dt, "l_tt columns", dt, self.l_tt.ncols())?;
        expect(self.l_tv.nrows() == dt, "l_tv rows", dt, self.l_tv.nrows())?;
        expect(self.l_tv.ncols() == dv, "l_tv columns", dv, self.l_tv.ncols())?;
        expect(self.l_vv.ncols() == dv, "l_vv columns", dv, self.l_vv.ncols())?;
        expect(self.l_vg.nrows() == dv, "l_vg rows", dv, self.l_vg.nrows())?;
        expect(self.l_vg.ncols() == dg, "l_vg columns", dg, self.l_vg.ncols())?;
        expect(self.f_t.nrows() == dv, "f_t rows", dv, self.f_t.nrows())?;
        expect(self.f_t.ncols() == dt, "f_t columns", dt, self.f_t.ncols())?;
        expect(self.f_v.nrows() == dv, "f_v rows", dv, self.f_v.nrows())?;
        expect(self.f_v.ncols() == dv, "f_v columns", dv, self.f_v.ncols())?;
        expect(self.f_g.nrows() == dv, "f_g rows", dv, self.f_g.nrows())?;
        expect(self.f_g.ncols() == dg, "f_g columns", dg, self.f_g.ncols())?;
        expect(self.vec_f_t_by_t.nrows() == dt * dv, "vec_f_t_by_t rows", dt * dv, self.vec_f_t_by_t.nrows())?;
        expect(self.vec_f_t_by_t.ncols() == dt, "vec_f_t_by_t columns", dt, self.vec_f_t_by_t.ncols())?;
        expect(self.vec_f_t_by_v.ncols() == dv, "vec_f_t_by_v columns", dv, self.vec_f_t_by_v.ncols())?;
        expect(self.vec_f_t_by_g.ncols() == dg, "vec_f_t_by_g columns", dg, self.vec_f_t_by_g.ncols())?;
        expect(self.vec_f_v_by_t.nrows() == dv * dv, "vec_f_v_by_t rows", dv * dv, self.vec_f_v_by_t.nrows())?;
        expect(self.vec_f_v_by_v.ncols() == dv, "vec_f_v_by_v columns", dv, self.vec_f_v_by_v.ncols())?;
        expect(self.vec_f_v_by_g.ncols() == dg, "vec_f_v_by_g columns", dg, self.vec_f_v_by_g.ncols())?;
        expect(self.lambda.len() == dv, "lambda", dv, self.lambda.len())?;

        let scale_tt = self.l_tt.amax().max(1.0);
        if (&self.l_tt - self.l_tt.transpose()).amax() > 1e-10 * scale_tt {
            return Err(Error::Inconsistency("l_tt is not symmetric".into()));
        }
        let scale_vv = self.l_vv.amax().max(1.0);
        if (&self.l_vv - self.l_vv.transpose()).amax() > 1e-10 * scale_vv {
            return Err(Error::Inconsistency("l_vv is not symmetric".into()));
        }
        Ok(())
    }

    /// Contracts a vec-Jacobian against the multiplier:
    /// `(λ' ⊗ I_d) J = Σ_y λ_y · J[y·d .. (y+1)·d, ·]`.
    fn contract(&self, vec_jac: &DMatrix<f64>, block_rows: usize) -> DMatrix<f64> {
        let cols = vec_jac.ncols();
        let mut out = DMatrix::zeros(block_rows, cols);
        for (y, lam) in self.lambda.iter().enumerate() {
            if *lam == 0.0 {
                continue;
            }
            let block = vec_jac.rows(y * block_rows, block_rows);
            out += block.scale(*lam);
        }
        out
    }

    /// `A_{θ,θ} = ∂²L/∂θ∂θ' − (λ'⊗I) ∂vec[(F_θ)']/∂θ'`.
    pub fn a_theta_theta(&self) -> DMatrix<f64> {
        let dt = self.dims().0;
        &self.l_tt - self.contract(&self.vec_f_t_by_t, dt)
    }

    pub fn a_theta_v(&self) -> DMatrix<f64> {
        let dt = self.dims().0;
        &self.l_tv - self.contract(&self.vec_f_t_by_v, dt)
    }

    pub fn a_theta_gamma(&self) -> DMatrix<f64> {
        let dt = self.dims().0;
        &self.l_tg - self.contract(&self.vec_f_t_by_g, dt)
    }

    pub fn a_v_theta(&self) -> DMatrix<f64> {
        let dv = self.dims().1;
        self.l_tv.transpose() - self.contract(&self.vec_f_v_by_t, dv)
    }

    pub fn a_v_v(&self) -> DMatrix<f64> {
        let dv = self.dims().1;
        &self.l_vv - self.contract(&self.vec_f_v_by_v, dv)
    }

    pub fn a_v_gamma(&self) -> DMatrix<f64> {
        let dv = self.dims().1;
        &self.l_vg - self.contract(&self.vec_f_v_by_g, dv)
    }
}

/// Maps the bus-engine analytic derivative bank into bundle slots
/// (`d_γ = 1`, the discount factor).
pub fn assemble_bundle_analytic(
    bank: &DerivativeBank,
    lambda: &DVector<f64>,
) -> Result<DerivativeBundle> {
    let dt = bank.l_theta_theta.nrows();
    let dv = bank.l_v_v.nrows();
    if lambda.len() != dv {
        return Err(Error::Dimension {
            what: "lambda",
            expected: dv,
            found: lambda.len(),
        });
    }

    let mut vec_f_t_by_t = DMatrix::zeros(dt * dv, dt);
    let mut vec_f_t_by_v = DMatrix::zeros(dt * dv, dv);
    let mut vec_f_t_by_g = DMatrix::zeros(dt * dv, 1);
    let mut vec_f_v_by_t = DMatrix::zeros(dv * dv, dt);
    let mut vec_f_v_by_v = DMatrix::zeros(dv * dv, dv);
    let mut vec_f_v_by_g = DMatrix::zeros(dv * dv, 1);

    for y in 0..dv {
        for k in 0..dt {
            for j in 0..dt {
                vec_f_t_by_t[(y * dt + k, j)] = bank.f2_theta_theta[y][(k, j)];
            }
            for z in 0..dv {
                vec_f_t_by_v[(y * dt + k, z)] = bank.f2_theta_v[y][(k, z)];
            }
            vec_f_t_by_g[(y * dt + k, 0)] = bank.f2_theta_beta[y][k];
        }
        for z in 0..dv {
            // Mixed partials are symmetric: ∂²F(y)/∂V(z)∂θ_j = ∂²F(y)/∂θ_j∂V(z).
            for j in 0..dt {
                vec_f_v_by_t[(y * dv + z, j)] = bank.f2_theta_v[y][(j, z)];
            }
            for w in 0..dv {
                vec_f_v_by_v[(y * dv + z, w)] = bank.f2_v_v[y][(z, w)];
            }
            vec_f_v_by_g[(y * dv + z, 0)] = bank.f2_v_beta[y][z];
        }
    }

    let bundle = DerivativeBundle {
        l_tt: bank.l_theta_theta.clone(),
        l_tv: bank.l_theta_v.clone(),
        l_vv: bank.l_v_v.clone(),
        l_tg: DMatrix::from_column_slice(dt, 1, bank.l_theta_beta.as_slice()),
        l_vg: DMatrix::from_column_slice(dv, 1, bank.l_v_beta.as_slice()),
        f_t: bank.f_theta.clone(),
        f_v: bank.f_v.clone(),
        f_g: DMatrix::from_column_slice(dv, 1, bank.f_beta.as_slice()),
        vec_f_t_by_t,
        vec_f_t_by_v,
        vec_f_t_by_g,
        vec_f_v_by_t,
        vec_f_v_by_v,
        vec_f_v_by_g,
        lambda: lambda.clone(),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Default base step for numeric differentiation, scaled per coordinate
/// by `1 + |coordinate|`: a reasonable balance of truncation against
/// roundoff for second differences of smooth problems in f64.
pub const DEFAULT_NUMERIC_STEP: f64 = 1e-5;

/// Assembles the bundle by central finite differences of the objective
/// and constraint callbacks around the stored optimum. No re-estimation
/// happens: every evaluation perturbs the stored point.
///
/// `step` is the base step, scaled per coordinate by `1 + |coordinate|`
/// ([`DEFAULT_NUMERIC_STEP`] when in doubt).
pub fn assemble_bundle_numeric(
    objective: impl Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> Result<f64>,
    constraint: impl Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
    point: &SensePoint,
    step: f64,
) -> Result<DerivativeBundle> {
    if step <= 0.0 {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let dt = point.theta.len();
    let dv = point.v.len();
    let dg = point.gamma.len();

    // Flatten (θ, V, γ) into one coordinate vector for the stencils.
    let flat: Vec<f64> = point
        .theta
        .iter()
        .chain(point.v.iter())
        .chain(point.gamma.iter())
        .copied()
        .collect();
    let unpack = |p: &[f64]| {
        (
            DVector::from_column_slice(&p[..dt]),
            DVector::from_column_slice(&p[dt..dt + dv]),
            DVector::from_column_slice(&p[dt + dv..]),
        )
    };
    let eval_l = |p: &[f64]| -> Result<f64> {
        let (t, v, g) = unpack(p);
        objective(&t, &v, &g)
    };
    let eval_f = |p: &[f64]| -> Result<DVector<f64>> {
        let (t, v, g) = unpack(p);
        let out = constraint(&t, &v, &g)?;
        if out.len() != dv {
            return Err(Error::Dimension {
                what: "constraint output",
                expected: dv,
                found: out.len(),
            });
        }
        Ok(out)
    };

    let h = |i: usize| step * (1.0 + flat[i].abs());
    let second_l = |i: usize, j: usize| -> Result<f64> {
        let (hi, hj) = (h(i), h(j));
        let mut p = flat.clone();
        p[i] += hi;
        p[j] += hj;
        let fpp = eval_l(&p)?;
        p.copy_from_slice(&flat);
        p[i] += hi;
        p[j] -= hj;
        let fpm = eval_l(&p)?;
        p.copy_from_slice(&flat);
        p[i] -= hi;
        p[j] += hj;
        let fmp = eval_l(&p)?;
        p.copy_from_slice(&flat);
        p[i] -= hi;
        p[j] -= hj;
        let fmm = eval_l(&p)?;
        Ok((fpp - fpm - fmp + fmm) / (4.0 * hi * hj))
    };
    let first_f = |i: usize| -> Result<DVector<f64>> {
        let hi = h(i);
        let mut p = flat.clone();
        p[i] += hi;
        let fp = eval_f(&p)?;
        p[i] = flat[i] - hi;
        let fm = eval_f(&p)?;
        Ok((fp - fm).unscale(2.0 * hi))
    };
    let second_f = |i: usize, j: usize| -> Result<DVector<f64>> {
        let (hi, hj) = (h(i), h(j));
        let mut p = flat.clone();
        p[i] += hi;
        p[j] += hj;
        let fpp = eval_f(&p)?;
        p.copy_from_slice(&flat);
        p[i] += hi;
        p[j] -= hj;
        let fpm = eval_f(&p)?;
        p.copy_from_slice(&flat);
        p[i] -= hi;
        p[j] += hj;
        let fmp = eval_f(&p)?;
        p.copy_from_slice(&flat);
        p[i] -= hi;
        p[j] -= hj;
        let fmm = eval_f(&p)?;
        Ok((fpp - fpm - fmp + fmm).unscale(4.0 * hi * hj))
    };

    // Coordinate ranges within the flat layout.
    let ti = |k: usize| k;
    let vi = |z: usize| dt + z;
    let gi = |j: usize| dt + dv + j;

    let mut l_tt = DMatrix::zeros(dt, dt);
    for k in 0..dt {
        for j in 0..=k {
            let d = second_l(ti(k), ti(j))?;
            l_tt[(k, j)] = d;
            l_tt[(j, k)] = d;
        }
    }
    let mut l_tv = DMatrix::zeros(dt, dv);
    for k in 0..dt {
        for z in 0..dv {
            l_tv[(k, z)] = second_l(ti(k), vi(z))?;
        }
    }
    let mut l_vv = DMatrix::zeros(dv, dv);
    for z in 0..dv {
        for w in 0..=z {
            let d = second_l(vi(z), vi(w))?;
            l_vv[(z, w)] = d;
            l_vv[(w, z)] = d;
        }
    }
    let mut l_tg = DMatrix::zeros(dt, dg);
    for k in 0..dt {
        for j in 0..dg {
            l_tg[(k, j)] = second_l(ti(k), gi(j))?;
        }
    }
    let mut l_vg = DMatrix::zeros(dv, dg);
    for z in 0..dv {
        for j in 0..dg {
            l_vg[(z, j)] = second_l(vi(z), gi(j))?;
        }
    }

    let mut f_t = DMatrix::zeros(dv, dt);
    for k in 0..dt {
        f_t.set_column(k, &first_f(ti(k))?);
    }
    let mut f_v = DMatrix::zeros(dv, dv);
    for z in 0..dv {
        f_v.set_column(z, &first_f(vi(z))?);
    }
    let mut f_g = DMatrix::zeros(dv, dg);
    for j in 0..dg {
        f_g.set_column(j, &first_f(gi(j))?);
    }

    let mut vec_f_t_by_t = DMatrix::zeros(dt * dv, dt);
    let mut vec_f_t_by_v = DMatrix::zeros(dt * dv, dv);
    let mut vec_f_t_by_g = DMatrix::zeros(dt * dv, dg);
    for k in 0..dt {
        for j in 0..dt {
            let col = second_f(ti(k), ti(j))?;
            for y in 0..dv {
                vec_f_t_by_t[(y * dt + k, j)] = col[y];
            }
        }
        for z in 0..dv {
            let col = second_f(ti(k), vi(z))?;
            for y in 0..dv {
                vec_f_t_by_v[(y * dt + k, z)] = col[y];
            }
        }
        for j in 0..dg {
            let col = second_f(ti(k), gi(j))?;
            for y in 0..dv {
                vec_f_t_by_g[(y * dt + k, j)] = col[y];
            }
        }
    }
    let mut vec_f_v_by_t = DMatrix::zeros(dv * dv, dt);
    let mut vec_f_v_by_v = DMatrix::zeros(dv * dv, dv);
    let mut vec_f_v_by_g = DMatrix::zeros(dv * dv, dg);
    for z in 0..dv {
        for j in 0..dt {
            let col = second_f(vi(z), ti(j))?;
            for y in 0..dv {
                vec_f_v_by_t[(y * dv + z, j)] = col[y];
            }
        }
        for w in 0..dv {
            let col = second_f(vi(z), vi(w))?;
            for y in 0..dv {
                vec_f_v_by_v[(y * dv + z, w)] = col[y];
            }
        }
        for j in 0..dg {
            let col = second_f(vi(z), gi(j))?;
            for y in 0..dv {
                vec_f_v_by_g[(y * dv + z, j)] = col[y];
            }
        }
    }

    let bundle = DerivativeBundle {
        l_tt,
        l_tv,
        l_vv,
        l_tg,
        l_vg,
        f_t,
        f_v,
        f_g,
        vec_f_t_by_t,
        vec_f_t_by_v,
        vec_f_t_by_g,
        vec_f_v_by_t,
        vec_f_v_by_v,
        vec_f_v_by_g,
        lambda: point.lambda.clone(),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quadratic objective, linear constraint: every second difference is
    /// exact up to roundoff for any step, so a generous one pins the
    /// blocks to ~1e-10.
    #[test]
    fn quadratic_problem_is_differentiated_exactly() {
        let objective = |t: &DVector<f64>, v: &DVector<f64>, g: &DVector<f64>| {
            Ok((t[0] - g[0]).powi(2) + (v[0] - 2.0 * g[0]).powi(2) + 0.5 * t[0] * v[0])
        };
        let constraint = |t: &DVector<f64>, _v: &DVector<f64>, g: &DVector<f64>| {
            Ok(DVector::from_vec(vec![t[0] + g[0]]))
        };
        let point = SensePoint {
            theta: DVector::from_vec(vec![0.7]),
            v: DVector::from_vec(vec![1.4]),
            gamma: DVector::from_vec(vec![0.7]),
            lambda: DVector::from_vec(vec![0.25]),
        };
        let bundle = assemble_bundle_numeric(objective, constraint, &point, 1e-2).unwrap();
        assert!((bundle.l_tt[(0, 0)] - 2.0).abs() < 1e-9);
        assert!((bundle.l_vv[(0, 0)] - 2.0).abs() < 1e-9);
        assert!((bundle.l_tv[(0, 0)] - 0.5).abs() < 1e-9);
        assert!((bundle.l_tg[(0, 0)] + 2.0).abs() < 1e-9);
        assert!((bundle.l_vg[(0, 0)] + 4.0).abs() < 1e-9);
        assert!((bundle.f_t[(0, 0)] - 1.0).abs() < 1e-10);
        assert!(bundle.f_v[(0, 0)].abs() < 1e-10);
        assert!((bundle.f_g[(0, 0)] - 1.0).abs() < 1e-10);
        assert!(bundle.vec_f_t_by_t.amax() < 1e-9);
    }

    #[test]
    fn zero_multiplier_reduces_a_blocks_to_raw_second_derivatives() {
        let objective = |t: &DVector<f64>, v: &DVector<f64>, g: &DVector<f64>| {
            Ok((t[0] * v[0]).powi(2) + g[0] * t[0].powi(3))
        };
        let constraint = |t: &DVector<f64>, v: &DVector<f64>, g: &DVector<f64>| {
            Ok(DVector::from_vec(vec![(t[0] + v[0] * g[0]).powi(2)]))
        };
        let point = SensePoint {
            theta: DVector::from_vec(vec![0.6]),
            v: DVector::from_vec(vec![0.9]),
            gamma: DVector::from_vec(vec![0.4]),
            lambda: DVector::from_vec(vec![0.0]),
        };
        let bundle = assemble_bundle_numeric(objective, constraint, &point, 1e-4).unwrap();
        assert_eq!(bundle.a_theta_theta(), bundle.l_tt);
        assert_eq!(bundle.a_theta_v(), bundle.l_tv);
        assert_eq!(bundle.a_v_v(), bundle.l_vv);
        assert_eq!(bundle.a_theta_gamma(), bundle.l_tg);
        assert_eq!(bundle.a_v_gamma(), bundle.l_vg);
        // The vec-Jacobian is nonzero, so a nonzero multiplier must move
        // the blocks.
        let mut shifted = bundle.clone();
        shifted.lambda[0] = 1.0;
        assert_ne!(shifted.a_theta_theta(), shifted.l_tt);
    }

    #[test]
    fn step_halving_is_stable() {
        // Richardson-style diagnostic on a smooth nonlinear problem.
        let objective = |t: &DVector<f64>, v: &DVector<f64>, g: &DVector<f64>| {
            Ok((t[0] * v[0]).sin() + (g[0] * t[0]).exp() + v[0].powi(3))
        };
        let constraint = |t: &DVector<f64>, v: &DVector<f64>, g: &DVector<f64>| {
            Ok(DVector::from_vec(vec![(t[0] + v[0] * g[0]).cos()]))
        };
        let point = SensePoint {
            theta: DVector::from_vec(vec![0.4]),
            v: DVector::from_vec(vec![0.8]),
            gamma: DVector::from_vec(vec![0.3]),
            lambda: DVector::from_vec(vec![1.0]),
        };
        let coarse = assemble_bundle_numeric(objective, constraint, &point, 1e-4).unwrap();
        let fine = assemble_bundle_numeric(objective, constraint, &point, 5e-5).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        assert!(rel(coarse.l_tt[(0, 0)], fine.l_tt[(0, 0)]) < 1e-4);
        assert!(rel(coarse.l_vv[(0, 0)], fine.l_vv[(0, 0)]) < 1e-4);
        assert!(rel(
            coarse.vec_f_v_by_v[(0, 0)],
            fine.vec_f_v_by_v[(0, 0)]
        ) < 1e-4);
    }

    #[test]
    fn callback_failures_propagate() {
        let objective = |_: &DVector<f64>, _: &DVector<f64>, _: &DVector<f64>| {
            Err(Error::Domain("objective blew up".into()))
        };
        let constraint = |_: &DVector<f64>, _: &DVector<f64>, _: &DVector<f64>| {
            Ok(DVector::from_vec(vec![0.0]))
        };
        let point = SensePoint {
            theta: DVector::from_vec(vec![0.0]),
            v: DVector::from_vec(vec![0.0]),
            gamma: DVector::from_vec(vec![0.0]),
            lambda: DVector::from_vec(vec![0.0]),
        };
        assert!(assemble_bundle_numeric(objective, constraint, &point, 1e-4).is_err());
    }

    #[test]
    fn gamma_block_shape_tracks_the_fixed_parameter_dimension() {
        let objective =
            |t: &DVector<f64>, v: &DVector<f64>, _: &DVector<f64>| Ok(t[0].powi(2) + v[0].powi(2));
        let constraint = |t: &DVector<f64>, _: &DVector<f64>, _: &DVector<f64>| {
            Ok(DVector::from_vec(vec![t[0]]))
        };
        let point = SensePoint {
            theta: DVector::from_vec(vec![0.1]),
            v: DVector::from_vec(vec![0.1]),
            gamma: DVector::from_vec(vec![0.5]),
            lambda: DVector::from_vec(vec![0.0]),
        };
        let bundle = assemble_bundle_numeric(objective, constraint, &point, 1e-4).unwrap();
        assert_eq!(bundle.f_g.nrows(), 1);
        assert_eq!(bundle.f_g.ncols(), 1);
    }
}
