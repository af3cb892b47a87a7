//! CSV result tables.

use std::fs::File;
use std::path::Path;

use reanalysis::Method;

use crate::config::Precision;
use crate::CliError;

pub fn fmt(v: f64, precision: Precision) -> String {
    match precision {
        Precision::Table => format!("{v:.6e}"),
        Precision::Full => format!("{v:e}"),
    }
}

pub fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementRow {
    pub scenario: String,
    pub method: Method,
    pub node: usize,
    pub dof: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: Method,
    pub n: usize,
    pub q: usize,
    pub iterations: usize,
    pub converged: bool,
    pub flops: Option<u128>,
    /// Median over the timed repeats, seconds.
    pub time: f64,
    pub time_min: f64,
    pub time_max: f64,
    pub repeat: usize,
    pub rct: Option<f64>,
}

/// Displacements and per-method statistics of one scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub displacements: Vec<DisplacementRow>,
    pub summary: Vec<SummaryRow>,
}

impl ResultTable {
    /// Orders rows by scenario, method, node and dof.
    pub fn sort(&mut self) {
        self.displacements.sort_by(|a, b| {
            (&a.scenario, a.method, a.node, a.dof).cmp(&(&b.scenario, b.method, b.node, b.dof))
        });
        self.summary
            .sort_by(|a, b| (&a.scenario, a.method).cmp(&(&b.scenario, b.method)));
    }

    pub fn write_displacements(&self, path: &Path, precision: Precision) -> Result<(), CliError> {
        let mut w = writer(path)?;
        w.write_record(["scenario", "method", "node", "dof", "value"])
            .map_err(io)?;
        for r in &self.displacements {
            w.write_record([
                r.scenario.clone(),
                r.method.to_string(),
                r.node.to_string(),
                r.dof.to_string(),
                fmt(r.value, precision),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn write_summary(&self, path: &Path, precision: Precision) -> Result<(), CliError> {
        let mut w = writer(path)?;
        w.write_record([
            "scenario",
            "method",
            "n",
            "q",
            "iterations",
            "converged",
            "flops",
            "repeat",
            "time_s",
            "time_min_s",
            "time_max_s",
            "rct",
        ])
        .map_err(io)?;
        for r in &self.summary {
            w.write_record([
                r.scenario.clone(),
                r.method.to_string(),
                r.n.to_string(),
                r.q.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.flops.map(|f| f.to_string()).unwrap_or_default(),
                r.repeat.to_string(),
                fmt(r.time, precision),
                fmt(r.time_min, precision),
                fmt(r.time_max, precision),
                r.rct.map(|x| fmt(x, precision)).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}
