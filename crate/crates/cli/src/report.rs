//! CSV reports with provenance columns, and the JSON run summary.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Appends a row and returns its index.
    pub fn push(&mut self, row: Vec<Cell>) -> usize {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
        self.rows.len() - 1
    }
}

/// An asserted invariant that did not hold, pointing at the offending row.
#[derive(Debug, Clone)]
pub struct Failure {
    pub report: &'static str,
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<Report>,
    pub failures: Vec<Failure>,
    /// Reported results that are not failures, e.g. an unbounded coherent family.
    pub findings: Vec<String>,
    pub metrics: Map<String, Value>,
}

impl Outcome {
    pub fn fail(&mut self, report: &'static str, row: usize, reason: impl Into<String>) {
        self.failures.push(Failure {
            report,
            row,
            reason: reason.into(),
        });
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    pub fn report(&self, name: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: &'static str,
}

pub const PROVENANCE_COLUMNS: [&str; 3] = ["seed", "config_hash", "version"];

fn writer<W: io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn full_row(prov: &Provenance, row: &[Cell]) -> Vec<String> {
    let mut out = vec![prov.seed.to_string(), prov.config_hash.clone(), prov.version.to_string()];
    out.extend(row.iter().map(Cell::render));
    out
}

fn header(report: &Report) -> Vec<String> {
    PROVENANCE_COLUMNS
        .iter()
        .chain(report.columns.iter())
        .map(|s| s.to_string())
        .collect()
}

pub fn write_csv(path: &Path, report: &Report, prov: &Provenance) -> io::Result<()> {
    let mut w = writer(fs::File::create(path)?);
    w.write_record(header(report))?;
    for row in &report.rows {
        w.write_record(full_row(prov, row))?;
    }
    w.flush()
}

/// Header and row as two CSV lines, for diagnostics.
pub fn render_row(report: &Report, row: usize, prov: &Provenance) -> String {
    let mut w = writer(Vec::new());
    w.write_record(header(report)).expect("in-memory write");
    w.write_record(full_row(prov, &report.rows[row])).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

pub fn summary(subcommand: &str, outcome: &Outcome, prov: &Provenance) -> Value {
    let reports: Vec<Value> = outcome
        .reports
        .iter()
        .map(|r| {
            json!({
                "name": r.name,
                "file": format!("{}.csv", r.name),
                "rows": r.rows.len(),
                "columns": header(r),
            })
        })
        .collect();
    let failures: Vec<Value> = outcome
        .failures
        .iter()
        .map(|f| json!({"report": f.report, "row": f.row, "reason": f.reason}))
        .collect();
    json!({
        "subcommand": subcommand,
        "version": prov.version,
        "seed": prov.seed,
        "config_hash": prov.config_hash,
        "passed": outcome.failures.is_empty(),
        "reports": reports,
        "failures": failures,
        "findings": outcome.findings,
        "metrics": Value::Object(outcome.metrics.clone()),
    })
}

pub fn write_outcome(dir: &Path, subcommand: &str, outcome: &Outcome, prov: &Provenance) -> io::Result<()> {
    for r in &outcome.reports {
        write_csv(&dir.join(format!("{}.csv", r.name)), r, prov)?;
    }
    let mut text = serde_json::to_string_pretty(&summary(subcommand, outcome, prov))?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)
}
