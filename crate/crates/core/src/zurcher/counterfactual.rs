//! Counterfactual experiments: affine parameter transforms, optional
//! transition replacements, and the average-welfare effect.

use nalgebra::{DMatrix, DVector};

use crate::dp_core::{solve_value_function, DdcModel, FixedPointOptions};
use crate::error::{Error, Result};

/// A counterfactual: utility parameters move to `θ̃ = Jθ + b` and the
/// transition matrices may be replaced wholesale.
#[derive(Clone, Debug)]
pub struct CounterfactualSpec {
    jacobian: DMatrix<f64>,
    offset: DVector<f64>,
    replacement_transitions: Option<Vec<DMatrix<f64>>>,
}

impl CounterfactualSpec {
    pub fn affine(jacobian: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if jacobian.nrows() != jacobian.ncols() || jacobian.nrows() != offset.len() {
            return Err(Error::Dimension {
                what: "counterfactual transform",
                expected: offset.len(),
                found: jacobian.nrows(),
            });
        }
        Ok(Self {
            jacobian,
            offset,
            replacement_transitions: None,
        })
    }

    pub fn identity(theta_dim: usize) -> Self {
        Self {
            jacobian: DMatrix::identity(theta_dim, theta_dim),
            offset: DVector::zeros(theta_dim),
            replacement_transitions: None,
        }
    }

    /// The experiment from the empirical exercise: scale the maintenance
    /// cost down by `fraction` (e.g. 0.1 for a 10% reduction), leaving
    /// the replacement cost unchanged.
    pub fn mc_reduction(fraction: f64) -> Self {
        Self {
            jacobian: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 - fraction, 1.0])),
            offset: DVector::zeros(2),
            replacement_transitions: None,
        }
    }

    pub fn with_transitions(mut self, transitions: Vec<DMatrix<f64>>) -> Self {
        self.replacement_transitions = Some(transitions);
        self
    }

    /// `θ̃ = H(θ)`.
    pub fn apply(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.jacobian * theta + &self.offset
    }

    /// `∂H/∂θ'`.
    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn replacement_transitions(&self) -> Option<&[DMatrix<f64>]> {
        self.replacement_transitions.as_deref()
    }

    /// The model under the counterfactual (transitions swapped if the
    /// spec replaces them; utilities are re-parameterized by `θ̃`).
    pub fn counterfactual_model(&self, model: &DdcModel) -> Result<DdcModel> {
        match &self.replacement_transitions {
            Some(q) => model.with_transitions(q.clone()),
            None => Ok(model.clone()),
        }
    }
}

/// Change in average welfare, `W = (1/X) Σ_x [Ṽ(x) − V(x)]`, from
/// solving the value function at `θ` and at `H(θ)`.
pub fn counterfactual_welfare(
    model: &DdcModel,
    theta: &DVector<f64>,
    spec: &CounterfactualSpec,
) -> Result<f64> {
    let opts = FixedPointOptions::default();
    let baseline = solve_value_function(model, theta.as_slice(), &opts)?;
    let cf_model = spec.counterfactual_model(model)?;
    let theta_tilde = spec.apply(theta);
    let cf = solve_value_function(&cf_model, theta_tilde.as_slice(), &opts)?;
    let diff = cf.values() - baseline.values();
    Ok(diff.sum() / diff.len() as f64)
}
