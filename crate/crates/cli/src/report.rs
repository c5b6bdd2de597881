//! Report rows and deterministic CSV/JSON output.

use std::path::Path;

use serde::Serialize;
use varexp::io::write_atomic;

use crate::CliError;

/// One tested instance of an inequality `lhs <= rhs`.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub case: String,
    #[serde(serialize_with = "ser_num")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_num")]
    pub rhs: f64,
    #[serde(serialize_with = "ser_num")]
    pub ratio: f64,
    pub pass: bool,
    pub anchor: &'static str,
    /// Where the check failed or what it was evaluated on.
    pub witness: String,
}

impl Row {
    /// Passes when `lhs <= rhs + tol · max(|rhs|, 1)`.
    pub fn new(case: impl Into<String>, lhs: f64, rhs: f64, tol: f64, anchor: &'static str, witness: impl Into<String>) -> Row {
        let ratio = if rhs != 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
        let pass = lhs <= rhs + tol * rhs.abs().max(1.0);
        Row { case: case.into(), lhs, rhs, ratio, pass, anchor, witness: witness.into() }
    }

    /// A row recorded as passing because the inequality makes no claim there.
    pub fn vacuous(case: impl Into<String>, lhs: f64, rhs: f64, anchor: &'static str, why: impl Into<String>) -> Row {
        let ratio = if rhs != 0.0 { lhs / rhs } else { 0.0 };
        Row { case: case.into(), lhs, rhs, ratio, pass: true, anchor, witness: why.into() }
    }
}

/// `f64` in shortest round-trip form, with `inf`/`nan` spelled out.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

pub fn rows_csv(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "lhs", "rhs", "ratio", "pass", "anchor", "witness"]).map_err(CliError::io)?;
    for r in rows {
        let (lhs, rhs, ratio) = (num(r.lhs), num(r.rhs), num(r.ratio));
        let pass = if r.pass { "true" } else { "false" };
        w.write_record([r.case.as_str(), &lhs, &rhs, &ratio, pass, r.anchor, &r.witness]).map_err(CliError::io)?;
    }
    w.into_inner().map_err(|e| CliError::io(e.into_error()))
}

pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(CliError::io)?;
    for r in rows {
        w.write_record(r).map_err(CliError::io)?;
    }
    w.into_inner().map_err(|e| CliError::io(e.into_error()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Serializes non-finite values as strings so they survive JSON.
pub fn ser_num<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&num(*v))
    }
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(CliError::from)
}
