//! Tables, checks and the run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use homlab_core::CarlemanConstants;

use crate::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A comparison of a measured value against a bound.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equals,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equals => "==",
        }
    }
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, bound, pass: value <= bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, bound, pass: value >= bound }
    }

    /// A yes/no property recorded as `1 == 1`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, relation: Relation::Equals, bound: 1.0, pass: ok }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub name: String,
    pub status: Status,
    pub seconds: f64,
    pub checks: Vec<Check>,
    pub metrics: serde_json::Value,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub stage: String,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub homlab_version: &'static str,
    pub command: String,
    pub status: Status,
    pub conventions: Vec<&'static str>,
    pub config: ExperimentConfig,
    pub constants: Option<CarlemanConstants>,
    pub stages: Vec<StageReport>,
    pub error: Option<ErrorReport>,
}

/// Fixed conventions echoed in every summary.
pub const CONVENTIONS: [&str; 4] = [
    "beta = 2 (exp(-4 lambda) - exp(-81 lambda / 16)), the sign that makes beta positive",
    "three-ball R is the integral over B_3",
    "weighted integrals use exp(2 tau (phi - phi(r_ref))); the factor cancels in every ratio",
    "the growth condition is evaluated on unnormalized integrals and depends on the scale of u",
];

/// A CSV table: header row plus rows of preformatted cells.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self { name: name.into(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<String> {
        let file_name = format!("{}.csv", self.name);
        let path = dir.join(&file_name);
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(out, "# homlab {VERSION}")?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(file_name)
    }
}

/// Shortest round-trip representation, so identical runs give identical bytes.
pub fn num(v: f64) -> String {
    if !v.is_finite() || v == 0.0 || (1e-4..1e7).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
