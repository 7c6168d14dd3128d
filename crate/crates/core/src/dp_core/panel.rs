//! Panel observations and their CSV representation.
//!
//! The on-disk format is a header `unit,period,state,action` followed by
//! one row per observation, with 1-based states and 0-based actions.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One observation: a unit observed in a period at a state taking an
/// action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Record {
    pub unit: u64,
    pub period: u64,
    /// 1-based state.
    pub state: usize,
    /// 0-based action.
    pub action: usize,
}

/// A validated panel of observations.
#[derive(Clone, Debug)]
pub struct PanelDataset {
    records: Vec<Record>,
    num_states: usize,
    num_actions: usize,
}

impl PanelDataset {
    /// Validates ranges (states in `1..=X`, actions in `0..A+1`) and that
    /// periods increase strictly within each unit, even when a unit's
    /// records are interleaved with other units'.
    pub fn new(records: Vec<Record>, num_states: usize, num_actions: usize) -> Result<Self> {
        let mut last_period: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if r.state < 1 || r.state > num_states {
                return Err(Error::Domain(format!(
                    "record {i}: state {} outside 1..={num_states}",
                    r.state
                )));
            }
            if r.action >= num_actions {
                return Err(Error::Domain(format!(
                    "record {i}: action {} outside 0..{num_actions}",
                    r.action
                )));
            }
            if let Some(period) = last_period.get(&r.unit) {
                if r.period <= *period {
                    return Err(Error::Domain(format!(
                        "record {i}: period {} does not increase within unit {}",
                        r.period, r.unit
                    )));
                }
            }
            last_period.insert(r.unit, r.period);
        }
        Ok(Self {
            records,
            num_states,
            num_actions,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Parses the CSV format with header `unit,period,state,action`.
    pub fn from_csv(path: impl AsRef<Path>, num_states: usize, num_actions: usize) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text, num_states, num_actions)
            .map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
                other => other,
            })
    }

    pub fn from_csv_str(text: &str, num_states: usize, num_actions: usize) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "unit,period,state,action" => {}
            other => {
                return Err(Error::parse(
                    "<panel csv>",
                    format!("expected header 'unit,period,state,action', found {other:?}"),
                ))
            }
        }
        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    "<panel csv>",
                    format!("line {}: expected 4 fields, found {}", lineno + 2, fields.len()),
                ));
            }
            let parse = |s: &str, name: &str| -> Result<u64> {
                s.trim().parse::<u64>().map_err(|_| {
                    Error::parse(
                        "<panel csv>",
                        format!("line {}: bad {name} value {s:?}", lineno + 2),
                    )
                })
            };
            records.push(Record {
                unit: parse(fields[0], "unit")?,
                period: parse(fields[1], "period")?,
                state: parse(fields[2], "state")? as usize,
                action: parse(fields[3], "action")? as usize,
            });
        }
        Self::new(records, num_states, num_actions)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("unit,period,state,action\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.unit, r.period, r.state, r.action);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn counts(&self) -> StateActionCounts {
        StateActionCounts::from_panel(self)
    }
}

/// Per-(state, action) observation counts. The likelihood and every one
/// of its derivatives depend on the data only through these, so
/// aggregating once makes estimation cost independent of the panel size.
#[derive(Clone, Debug)]
pub struct StateActionCounts {
    /// `counts[x-1][a]`.
    counts: Vec<Vec<f64>>,
}

impl StateActionCounts {
    pub fn from_panel(data: &PanelDataset) -> Self {
        let mut counts = vec![vec![0.0; data.num_actions()]; data.num_states()];
        for r in data.records() {
            counts[r.state - 1][r.action] += 1.0;
        }
        Self { counts }
    }

    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    /// Count of observations at 1-based `state` taking `action`.
    pub fn at(&self, state: usize, action: usize) -> f64 {
        self.counts[state - 1][action]
    }

    /// Total observations at a 1-based state.
    pub fn state_total(&self, state: usize) -> f64 {
        self.counts[state - 1].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }
}
