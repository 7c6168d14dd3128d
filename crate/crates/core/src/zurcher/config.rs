//! Model configuration, mileage transitions, and flow utilities.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dp_core::DdcModel;
use crate::error::{Error, Result};

/// Configuration of a bus-engine replacement model instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZurcherConfig {
    /// Number of mileage states `X` (at least 3).
    pub num_states: usize,
    /// Probability of advancing one mileage state under maintenance.
    pub phi1: f64,
    /// Probability of advancing two mileage states under maintenance.
    pub phi2: f64,
    /// Maintenance cost slope.
    pub mc: f64,
    /// Replacement cost level.
    pub rc: f64,
    /// Discount factor.
    pub beta: f64,
}

impl ZurcherConfig {
    /// Desk-scale instance used by the bundled examples and tests: small
    /// enough that a full estimate-plus-sensitivity pass stays well under
    /// a second.
    pub fn desk_scale() -> Self {
        Self {
            num_states: 20,
            phi1: 0.35,
            phi2: 0.10,
            mc: 0.05,
            rc: 8.0,
            beta: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states < 3 {
            return Err(Error::Domain(format!(
                "num_states must be at least 3, got {}",
                self.num_states
            )));
        }
        if self.phi1 < 0.0 || self.phi2 < 0.0 || self.phi1 + self.phi2 > 1.0 {
            return Err(Error::Domain(format!(
                "mileage increment probabilities invalid: phi1={}, phi2={}",
                self.phi1, self.phi2
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Domain(format!(
                "discount factor must lie in [0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Utility parameters as a vector, ordered `(MC, RC)`.
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.mc, self.rc])
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_theta(mut self, theta: &DVector<f64>) -> Self {
        self.mc = theta[0];
        self.rc = theta[1];
        self
    }

    /// Builds the generic model: two actions, mileage transitions, and the
    /// `(MC, RC)` flow utility.
    pub fn model(&self) -> Result<DdcModel> {
        self.validate()?;
        let (q0, q1) = build_transitions(self)?;
        DdcModel::new(
            vec![q0, q1],
            self.beta,
            2,
            Arc::new(|theta: &[f64], a, x| {
                if a == 0 {
                    theta[1] - theta[0] * x as f64
                } else {
                    0.0
                }
            }),
            Arc::new(|_theta: &[f64], a, x| {
                if a == 0 {
                    vec![-(x as f64), 1.0]
                } else {
                    vec![0.0, 0.0]
                }
            }),
        )
    }

    /// Flat `key = value` serialization (keys `num_states, phi1, phi2,
    /// mc, rc, beta`), full round-trip precision.
    pub fn to_key_values(&self) -> String {
        format!(
            "num_states = {}\nphi1 = {}\nphi2 = {}\nmc = {}\nrc = {}\nbeta = {}\n",
            self.num_states,
            fmt_f64(self.phi1),
            fmt_f64(self.phi2),
            fmt_f64(self.mc),
            fmt_f64(self.rc),
            fmt_f64(self.beta),
        )
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = Self {
            num_states: 0,
            phi1: f64::NAN,
            phi2: f64::NAN,
            mc: f64::NAN,
            rc: f64::NAN,
            beta: f64::NAN,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse("<config>", format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::parse(
                    "<config>",
                    format!("line {}: bad {what} value {value:?}", lineno + 1),
                )
            };
            match key {
                "num_states" => {
                    cfg.num_states = value.parse().map_err(|_| bad("num_states"))?;
                }
                "phi1" => cfg.phi1 = value.parse().map_err(|_| bad("phi1"))?,
                "phi2" => cfg.phi2 = value.parse().map_err(|_| bad("phi2"))?,
                "mc" => cfg.mc = value.parse().map_err(|_| bad("mc"))?,
                "rc" => cfg.rc = value.parse().map_err(|_| bad("rc"))?,
                "beta" => cfg.beta = value.parse().map_err(|_| bad("beta"))?,
                other => {
                    return Err(Error::parse(
                        "<config>",
                        format!("line {}: unknown key {other:?}", lineno + 1),
                    ))
                }
            }
        }
        if cfg.num_states == 0 || [cfg.phi1, cfg.phi2, cfg.mc, cfg.rc, cfg.beta]
            .iter()
            .any(|v| v.is_nan())
        {
            return Err(Error::parse("<config>", "missing required key".to_string()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_key_values(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that round-trips.
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Mileage transition matrices `(Q_0, Q_1)`.
///
/// Maintenance: mass `(1−φ₁−φ₂, φ₁, φ₂)` on `(x, x+1, x+2)` for
/// `x ≤ X−2`, `(1−φ₁, φ₁)` on `(x, x+1)` at `x = X−1`, absorbing at the
/// top state. Replacement resets every state to 1, so `Q_1` is the
/// rank-one matrix with all rows `e₁'`.
pub fn build_transitions(config: &ZurcherConfig) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    config.validate()?;
    let x_dim = config.num_states;
    let (phi1, phi2) = (config.phi1, config.phi2);

    let mut q0 = DMatrix::zeros(x_dim, x_dim);
    for x in 0..x_dim {
        if x + 2 < x_dim {
            q0[(x, x)] = 1.0 - phi1 - phi2;
            q0[(x, x + 1)] = phi1;
            q0[(x, x + 2)] = phi2;
        } else if x + 1 < x_dim {
            q0[(x, x)] = 1.0 - phi1;
            q0[(x, x + 1)] = phi1;
        } else {
            q0[(x, x)] = 1.0;
        }
    }

    let mut q1 = DMatrix::zeros(x_dim, x_dim);
    for x in 0..x_dim {
        q1[(x, 0)] = 1.0;
    }
    Ok((q0, q1))
}

/// Flow utility: `π(0, x) = RC − MC·x` for maintenance, `π(1, x) = 0`
/// for replacement (the normalized action).
pub fn flow_utility(config: &ZurcherConfig, theta: &DVector<f64>, action: usize, state: usize) -> f64 {
    debug_assert!(state >= 1 && state <= config.num_states);
    if action == 0 {
        theta[1] - theta[0] * state as f64
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_state_config() -> ZurcherConfig {
        ZurcherConfig {
            num_states: 4,
            phi1: 0.3,
            phi2: 0.1,
            mc: 0.05,
            rc: 8.0,
            beta: 0.9,
        }
    }

    #[test]
    fn maintenance_row_in_the_interior() {
        let (q0, _) = build_transitions(&four_state_config()).unwrap();
        let row: Vec<f64> = q0.row(0).iter().copied().collect();
        assert_eq!(row, vec![0.6, 0.3, 0.1, 0.0]);
    }

    #[test]
    fn maintenance_rows_near_the_boundary() {
        let (q0, _) = build_transitions(&four_state_config()).unwrap();
        let row3: Vec<f64> = q0.row(2).iter().copied().collect();
        assert_eq!(row3, vec![0.0, 0.0, 0.7, 0.3]);
        let row4: Vec<f64> = q0.row(3).iter().copied().collect();
        assert_eq!(row4, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn replacement_resets_every_state() {
        let (_, q1) = build_transitions(&four_state_config()).unwrap();
        for x in 0..4 {
            assert_eq!(q1[(x, 0)], 1.0);
            for y in 1..4 {
                assert_eq!(q1[(x, y)], 0.0);
            }
        }
    }

    #[test]
    fn renewal_structure_gives_one_period_dependence() {
        // Q_0 Q_1 and Q_1 Q_1 both collapse to the all-rows-e₁ matrix.
        let (q0, q1) = build_transitions(&ZurcherConfig::desk_scale()).unwrap();
        let a = &q0 * &q1;
        let b = &q1 * &q1;
        assert_eq!(a, b);
    }

    #[test]
    fn flow_utility_matches_the_cost_specification() {
        let cfg = ZurcherConfig {
            num_states: 90,
            ..ZurcherConfig::desk_scale()
        };
        let theta = DVector::from_vec(vec![0.01, 8.0]);
        assert!((flow_utility(&cfg, &theta, 0, 90) - 7.1).abs() < 1e-12);
        for x in [1, 45, 90] {
            assert_eq!(flow_utility(&cfg, &theta, 1, x), 0.0);
        }
        // MC = 0 makes maintenance utility flat in mileage.
        let flat = DVector::from_vec(vec![0.0, 8.0]);
        assert_eq!(flow_utility(&cfg, &flat, 0, 1), flow_utility(&cfg, &flat, 0, 90));
    }

    #[test]
    fn config_key_values_roundtrip() {
        let cfg = ZurcherConfig::desk_scale();
        let text = cfg.to_key_values();
        let back = ZurcherConfig::from_key_values(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_reads_from_a_file_with_comments() {
        let dir = std::env::temp_dir().join(format!("zurcher-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.conf");
        std::fs::write(
            &path,
            "# bus engine model\nnum_states = 12\nphi1 = 0.3\nphi2 = 0.2  # two-step jump\nmc = 0.1\nrc = 5.5\nbeta = 0.9\n",
        )
        .unwrap();
        let cfg = ZurcherConfig::from_file(&path).unwrap();
        assert_eq!(cfg.num_states, 12);
        assert_eq!(cfg.rc, 5.5);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn config_rejects_bad_probabilities() {
        let mut cfg = ZurcherConfig::desk_scale();
        cfg.phi1 = 0.7;
        cfg.phi2 = 0.5;
        assert!(cfg.validate().is_err());
    }
}
