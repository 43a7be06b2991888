use crate::c64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Floats(Vec<f64>),
    Ints(Vec<i64>),
    /// (re, im) pairs.
    Complex(Vec<[f64; 2]>),
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.into())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Floats(v)
    }
}

impl From<Vec<usize>> for Value {
    fn from(v: Vec<usize>) -> Self {
        Value::Ints(v.into_iter().map(|x| x as i64).collect())
    }
}

impl From<c64> for Value {
    fn from(z: c64) -> Self {
        Value::Complex(vec![[z.re, z.im]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: String,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: "<=".into(), limit, passed: value <= limit }
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: ">".into(), limit, passed: value > limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: ">=".into(), limit, passed: value >= limit }
    }

    pub fn equal(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: "==".into(), limit, passed: value == limit }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::equal(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub id: String,
    pub passed: bool,
    /// Wall-clock seconds; excluded from reproducibility comparisons.
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub values: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub experiment: String,
    pub tolerance_scale: f64,
    pub status: String,
    /// The configuration file, verbatim.
    pub config: String,
    pub cells: Vec<CellReport>,
}

impl Report {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report is serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn failed_cells(&self) -> Vec<&str> {
        self.cells.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub cell: String,
    pub k: usize,
    pub value: c64,
}

pub const CURVE_HEADER: [&str; 5] = ["experiment", "cell", "k", "re", "im"];

/// 17 significant digits, locale independent.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_curves<W: Write>(out: W, experiment: &str, points: &[CurvePoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for p in points {
        w.write_record([
            experiment,
            &p.cell,
            &p.k.to_string(),
            &format_float(p.value.re),
            &format_float(p.value.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}
