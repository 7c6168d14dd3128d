//! Core domain types: the model, value vectors, and choice probabilities.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::check_row_stochastic;

/// Flow utility `π(a, x; θ)`. Takes the parameter vector, a 0-based
/// action, and a 1-based state.
pub type UtilityFn = Arc<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>;

/// Gradient `∂π/∂θ` at `(a, x)`, same argument conventions.
pub type UtilityGradFn = Arc<dyn Fn(&[f64], usize, usize) -> Vec<f64> + Send + Sync>;

/// A stationary dynamic discrete choice model: finite state space,
/// per-action Markov transitions, parametric flow utility, and a
/// discount factor slot.
#[derive(Clone)]
pub struct DdcModel {
    num_states: usize,
    num_actions: usize,
    theta_dim: usize,
    transitions: Vec<DMatrix<f64>>,
    beta: f64,
    utility: UtilityFn,
    utility_grad: UtilityGradFn,
}

impl DdcModel {
    /// Builds a model, validating the transition matrices (row-stochastic
    /// within 1e-12, nonnegative) and the discount factor (`β < 1`).
    pub fn new(
        transitions: Vec<DMatrix<f64>>,
        beta: f64,
        theta_dim: usize,
        utility: UtilityFn,
        utility_grad: UtilityGradFn,
    ) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::Domain("model needs at least one action".into()));
        }
        let num_states = transitions[0].nrows();
        if num_states == 0 {
            return Err(Error::Domain("model needs at least one state".into()));
        }
        for (a, q) in transitions.iter().enumerate() {
            if q.nrows() != num_states || q.ncols() != num_states {
                return Err(Error::Dimension {
                    what: "transition matrix",
                    expected: num_states,
                    found: q.nrows(),
                });
            }
            check_row_stochastic(q, 1e-12, "transition matrix")?;
            let _ = a;
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Domain(format!(
                "discount factor must lie in [0, 1), got {beta}"
            )));
        }
        Ok(Self {
            num_states,
            num_actions: transitions.len(),
            theta_dim,
            transitions,
            beta,
            utility,
            utility_grad,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Number of actions, `A + 1`.
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn theta_dim(&self) -> usize {
        self.theta_dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Same model with a different discount factor. The discount factor is
    /// the leading fixed parameter, so analyses re-slot it constantly.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Domain(format!(
                "discount factor must lie in [0, 1), got {beta}"
            )));
        }
        let mut m = self.clone();
        m.beta = beta;
        Ok(m)
    }

    /// Same model with replaced transition matrices (counterfactual
    /// experiments swap these). Revalidates everything.
    pub fn with_transitions(&self, transitions: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(
            transitions,
            self.beta,
            self.theta_dim,
            Arc::clone(&self.utility),
            Arc::clone(&self.utility_grad),
        )
    }

    pub fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transitions
    }

    pub fn transition(&self, action: usize) -> &DMatrix<f64> {
        &self.transitions[action]
    }

    /// Flow utility `π(a, x; θ)` (1-based state).
    pub fn utility(&self, theta: &[f64], action: usize, state: usize) -> f64 {
        (self.utility)(theta, action, state)
    }

    /// Gradient of the flow utility with respect to θ.
    pub fn utility_grad(&self, theta: &[f64], action: usize, state: usize) -> Vec<f64> {
        (self.utility_grad)(theta, action, state)
    }
}

impl std::fmt::Debug for DdcModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DdcModel")
            .field("num_states", &self.num_states)
            .field("num_actions", &self.num_actions)
            .field("theta_dim", &self.theta_dim)
            .field("beta", &self.beta)
            .finish()
    }
}

/// Ex ante value function, one entry per state.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector {
    values: DVector<f64>,
}

impl ValueVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "value function has non-finite entry at state {}",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(num_states: usize) -> Self {
        Self {
            values: DVector::zeros(num_states),
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Value at a 1-based state.
    pub fn at(&self, state: usize) -> f64 {
        self.values[state - 1]
    }
}

/// Conditional choice probabilities, `X × (A+1)`, row `x-1` holding
/// `P[a | x]`. Rows sum to one within 1e-12 and every entry is interior;
/// the constructor rejects anything else rather than clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct CcpMatrix {
    probs: DMatrix<f64>,
}

impl CcpMatrix {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        for x in 0..probs.nrows() {
            let mut sum = 0.0;
            for a in 0..probs.ncols() {
                let p = probs[(x, a)];
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain(format!(
                        "choice probability P[a={a} | x={}] = {p} is not interior",
                        x + 1
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "choice probabilities at state {} sum to {sum:.17}",
                    x + 1
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.ncols()
    }

    /// `P[a | x]` with a 1-based state.
    pub fn prob(&self, action: usize, state: usize) -> f64 {
        self.probs[(state - 1, action)]
    }

    /// Column of probabilities for one action across all states.
    pub fn action_column(&self, action: usize) -> DVector<f64> {
        self.probs.column(action).into_owned()
    }
}
