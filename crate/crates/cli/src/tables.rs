//! CSV table formats emitted by the commands, with readers so every
//! emitted file round-trips through this module.

use ddc_sense::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_delta(d: f64) -> String {
    // 1e-4-style column suffixes.
    format!("{d:e}")
}

/// One row of the local-sensitivity table (one target at one β).
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRow {
    pub target: String,
    pub beta: f64,
    pub estimate: f64,
    /// Undefined-flagged elasticities stay empty in the CSV.
    pub elasticity: Option<f64>,
    /// Percentage approximation errors, aligned with the delta list.
    pub errors: Vec<f64>,
}

pub fn write_sensitivity_csv(rows: &[SensitivityRow], deltas: &[f64]) -> String {
    let mut out = String::from("target,beta,estimate,elasticity");
    for d in deltas {
        out.push_str(&format!(",err_{}", fmt_delta(*d)));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r.target);
        out.push(',');
        out.push_str(&fmt(r.beta));
        out.push(',');
        out.push_str(&fmt(r.estimate));
        out.push(',');
        if let Some(e) = r.elasticity {
            out.push_str(&fmt(e));
        }
        for e in &r.errors {
            out.push(',');
            out.push_str(&fmt(*e));
        }
        out.push('\n');
    }
    out
}

pub fn read_sensitivity_csv(text: &str) -> Result<(Vec<SensitivityRow>, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("<sensitivity csv>", "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..4] != ["target", "beta", "estimate", "elasticity"] {
        return Err(Error::parse(
            "<sensitivity csv>",
            format!("unexpected header {header:?}"),
        ));
    }
    let deltas: Vec<f64> = cols[4..]
        .iter()
        .map(|c| {
            c.strip_prefix("err_")
                .and_then(|d| d.parse::<f64>().ok())
                .ok_or_else(|| Error::parse("<sensitivity csv>", format!("bad column {c:?}")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + deltas.len() {
            return Err(Error::parse(
                "<sensitivity csv>",
                format!("line {}: wrong field count", lineno + 2),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse("<sensitivity csv>", format!("bad number {s:?}")))
        };
        rows.push(SensitivityRow {
            target: fields[0].to_string(),
            beta: num(fields[1])?,
            estimate: num(fields[2])?,
            elasticity: if fields[3].is_empty() {
                None
            } else {
                Some(num(fields[3])?)
            },
            errors: fields[4..].iter().map(|s| num(s)).collect::<Result<_>>()?,
        });
    }
    Ok((rows, deltas))
}

/// One row of the bounds table (one interval upper endpoint).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsRow {
    pub target: String,
    pub upper_bound_beta: f64,
    pub bound_lo: f64,
    pub bound_hi: f64,
    pub wall_time_s: f64,
}

pub fn write_bounds_csv(rows: &[BoundsRow]) -> String {
    let mut out = String::from("target,upper_bound_beta,bound_lo,bound_hi,wall_time_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.target,
            fmt(r.upper_bound_beta),
            fmt(r.bound_lo),
            fmt(r.bound_hi),
            fmt(r.wall_time_s)
        ));
    }
    out
}

pub fn read_bounds_csv(text: &str) -> Result<Vec<BoundsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("target,upper_bound_beta,bound_lo,bound_hi,wall_time_s") => {}
        other => {
            return Err(Error::parse(
                "<bounds csv>",
                format!("unexpected header {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse("<bounds csv>", "wrong field count"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse("<bounds csv>", format!("bad number {s:?}")))
        };
        rows.push(BoundsRow {
            target: fields[0].to_string(),
            upper_bound_beta: num(fields[1])?,
            bound_lo: num(fields[2])?,
            bound_hi: num(fields[3])?,
            wall_time_s: num(fields[4])?,
        });
    }
    Ok(rows)
}

/// One per-(action, state) monotonicity verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictRow {
    pub action: usize,
    pub state: usize,
    pub direction: String,
    pub certificate: String,
}

pub fn write_verdict_csv(rows: &[VerdictRow]) -> String {
    let mut out = String::from("action,state,direction,certificate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.action, r.state, r.direction, r.certificate
        ));
    }
    out
}

pub fn read_verdict_csv(text: &str) -> Result<Vec<VerdictRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("action,state,direction,certificate") => {}
        other => {
            return Err(Error::parse(
                "<verdict csv>",
                format!("unexpected header {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse("<verdict csv>", "wrong field count"));
        }
        let idx = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::parse("<verdict csv>", format!("bad index {s:?}")))
        };
        rows.push(VerdictRow {
            action: idx(fields[0])?,
            state: idx(fields[1])?,
            direction: fields[2].to_string(),
            certificate: fields[3].to_string(),
        });
    }
    Ok(rows)
}

/// Tidy `(beta, series, value)` rows for external plotting.
pub fn write_tidy_csv(rows: &[(f64, String, f64)]) -> String {
    let mut out = String::from("beta,series,value\n");
    for (beta, series, value) in rows {
        out.push_str(&format!("{},{},{}\n", fmt(*beta), series, fmt(*value)));
    }
    out
}

pub fn read_tidy_csv(text: &str) -> Result<Vec<(f64, String, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("beta,series,value") => {}
        other => {
            return Err(Error::parse(
                "<tidy csv>",
                format!("unexpected header {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse("<tidy csv>", "wrong field count"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse("<tidy csv>", format!("bad number {s:?}")))
        };
        rows.push((num(fields[0])?, fields[1].to_string(), num(fields[2])?));
    }
    Ok(rows)
}
