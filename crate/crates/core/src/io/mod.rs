//! Files produced and consumed by the command-line tool.

mod manifest;
mod snapshots;
mod svg;
mod tables;

pub use manifest::RunManifest;
pub use snapshots::{decode_snapshots, encode_snapshots, read_snapshots, write_snapshots, MAGIC};
pub use svg::{spacetime_svg, time_slice_svg};
pub use tables::{
    events_csv, facets_csv, read_events_csv, summary_rows, write_events_csv, write_facets_csv,
    write_report_tables,
};

use std::path::Path;

use thiserror::Error;

use crate::diagnostics::DiagnosticsReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("corrupt snapshot file: {0}")]
    CorruptFile(String),
    #[error("u and h histories are not aligned")]
    Misaligned,
    #[error("relay value {value} at snapshot {snapshot}, point {point} does not fit a signed byte")]
    Unrepresentable { snapshot: usize, point: usize, value: f64 },
    #[error("space-time pictures need one space dimension (got {dim}); use a time slice")]
    DimensionUnsupported { dim: usize },
    #[error("snapshot {index} out of range ({len} snapshots)")]
    SnapshotOutOfRange { index: usize, len: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        IoError::Csv(e.to_string())
    }
}

pub fn report_json(report: &DiagnosticsReport) -> Result<String, IoError> {
    serde_json::to_string_pretty(report).map_err(|e| IoError::Json(e.to_string()))
}

pub fn write_report_json(report: &DiagnosticsReport, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, report_json(report)? + "\n")?;
    Ok(())
}
