//! CSV and JSON output for result tables.
//!
//! CSV columns are fixed; numbers use six significant digits. Timing is
//! machine dependent, so `mean_solve_ms` is written as `NA` unless timing
//! output is requested; without it repeated runs give identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::ResultTable;
use crate::error::{DoaError, Result};

pub const CSV_HEADER: &str = "scenario_id,sweep_axis,sweep_value,rmse_deg,mean_iters,mean_solve_ms,n_failed";

/// Placeholder for values that are not reported.
pub const NA: &str = "NA";

/// Baselines that are not produced by this crate.
pub const MISSING_BASELINES: [&str; 2] = ["sbl", "crb"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = DoaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(DoaError::Config(format!("unknown output format '{other}' (csv | json)"))),
        }
    }
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return NA.into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { "-" } else { "+" };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn to_csv(table: &ResultTable, timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let fields = [
            r.scenario_id.clone(),
            r.sweep_axis.clone(),
            r.sweep_value.map_or_else(|| NA.to_string(), format_sig6),
            format_sig6(r.rmse_deg),
            format_sig6(r.mean_iters),
            match (timing, r.mean_solve_ms) {
                (true, Some(ms)) => format_sig6(ms),
                _ => NA.to_string(),
            },
            r.n_failed.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub rows: ResultTable,
    pub missing_baselines: Vec<String>,
    pub timing: bool,
}

pub fn to_json(table: &ResultTable, timing: bool) -> Result<String> {
    let mut t = table.clone();
    if !timing {
        for r in &mut t.rows {
            r.mean_solve_ms = None;
            for tr in &mut r.trials {
                tr.solve_ms = None;
            }
        }
    }
    let report = JsonReport {
        rows: t,
        missing_baselines: MISSING_BASELINES.iter().map(|s| s.to_string()).collect(),
        timing,
    };
    serde_json::to_string_pretty(&report).map(|s| s + "\n").map_err(|e| DoaError::Io(e.to_string()))
}

pub fn from_json(text: &str) -> Result<JsonReport> {
    serde_json::from_str(text).map_err(|e| DoaError::Parse(e.to_string()))
}

pub fn render(table: &ResultTable, format: Format, timing: bool) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(table, timing)),
        Format::Json => to_json(table, timing),
    }
}

/// Writes the table to `path`, or to stdout when `path` is `None`.
pub fn emit(table: &ResultTable, format: Format, path: Option<&Path>, timing: bool) -> Result<()> {
    let text = render(table, format, timing)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
