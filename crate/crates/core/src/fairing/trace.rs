use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "sweep,vertex,level,iter,x,y,z,step_norm,E,sigma,backtracks";

/// One accepted (or rejected) outer iteration of a vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: usize,
    pub vertex: usize,
    pub level: usize,
    pub iter: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub step_norm: f64,
    /// Robust objective after the step, with the iteration's basis and scale.
    #[serde(rename = "E")]
    pub energy: f64,
    pub sigma: f64,
    pub backtracks: usize,
    /// Objective before the step under the same basis and scale. Not exported.
    #[serde(skip)]
    pub energy_before: f64,
}

/// A vertex that could not be faired in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipRecord {
    pub sweep: usize,
    pub vertex: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub sweep: usize,
    pub max_motion: f64,
    /// Sum of the last recorded objective of every faired vertex.
    pub total_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FairingTrace {
    /// Configuration echo written as the first comment line.
    pub config: String,
    pub rows: Vec<TraceRow>,
    pub skips: Vec<SkipRecord>,
    pub sweeps: Vec<SweepSummary>,
}

impl FairingTrace {
    /// Rows whose objective rose across the accepted step.
    pub fn monotonicity_violations(&self) -> Vec<&TraceRow> {
        self.rows.iter().filter(|r| r.energy > r.energy_before).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if !self.config.is_empty() {
            let _ = writeln!(out, "# {}", self.config);
        }
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.sweep, r.vertex, r.level, r.iter, r.x, r.y, r.z, r.step_norm, r.energy, r.sigma, r.backtracks
            );
        }
        for s in &self.skips {
            let _ = writeln!(out, "# skip sweep={} vertex={} reason={}", s.sweep, s.vertex, s.reason);
        }
        for s in &self.sweeps {
            let _ = writeln!(
                out,
                "# sweep {} max_motion={} total_E={}",
                s.sweep, s.max_motion, s.total_energy
            );
        }
        out
    }

    /// Parses trace rows; comment lines are ignored apart from the config echo.
    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let config = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .filter(|l| !l.starts_with("skip ") && !l.starts_with("sweep "))
            .unwrap_or_default()
            .to_string();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .clone();
        let expected: Vec<&str> = TRACE_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::parse(path, 1, format!("expected header `{TRACE_HEADER}`")));
        }
        let mut rows = Vec::new();
        for record in reader.deserialize::<TraceRow>() {
            let row = record.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                Error::parse(path, line, e.to_string())
            })?;
            rows.push(row);
        }
        Ok(Self {
            config,
            rows,
            skips: Vec::new(),
            sweeps: Vec::new(),
        })
    }
}
