use std::path::Path;

use meandim_core::Error;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::run::Row;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ASSERTION: u8 = 1;
pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_CAP: u8 = 3;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triple: Option<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub threads: usize,
    pub caps: crate::config::Caps,
    pub wall_ms: u128,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    pub anchor: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub passed: bool,
    pub exit_code: u8,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    pub details: Map<String, Value>,
    pub provenance: Provenance,
}

pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::CounterexampleFound(..)
        | Error::QuasiAxiomViolation(..)
        | Error::WitnessViolation { .. }
        | Error::AssertionFailed(_)
        | Error::GapCollapse { .. }
        | Error::Unresolved(..)
        | Error::Inconclusive(_)
        | Error::NotFoundWithin(_)
        | Error::TemplateDoesNotFit(_)
        | Error::DensityUnachievable(_)
        | Error::NonCommuting => EXIT_ASSERTION,
        Error::EmptyCover
        | Error::MismatchedPointSets(..)
        | Error::InvalidInput(_)
        | Error::InsufficientMargin { .. }
        | Error::NotInvariant
        | Error::RankMismatch { .. }
        | Error::NonHyperbolic
        | Error::InvalidParams(_)
        | Error::WindowTooShort(_)
        | Error::DegenerateLadder(_) => EXIT_SCHEMA,
    }
}

pub fn error_info(e: &Error) -> ErrorInfo {
    let dbg = format!("{e:?}");
    let kind = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
    let triple = match e {
        Error::QuasiAxiomViolation(i, j, k) => Some((*i, *j, *k)),
        _ => None,
    };
    ErrorInfo { kind, message: e.to_string(), triple }
}

/// Rows as CSV with the fixed column order `quantity, grid, lb, ub, verdict`.
pub fn csv_bytes(rows: &[Row]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "grid", "lb", "ub", "verdict"])?;
    for r in rows {
        w.write_record([r.quantity.as_str(), r.grid.as_str(), &fmt_f64(r.lb), &fmt_f64(r.ub), r.verdict.as_str()])?;
    }
    Ok(w.into_inner()?)
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn write_outputs(dir: &Path, report: &Report) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{}.csv", report.name)), csv_bytes(&report.rows)?)?;
    std::fs::write(dir.join(format!("{}.json", report.name)), serde_json::to_vec_pretty(report)?)?;
    Ok(())
}
