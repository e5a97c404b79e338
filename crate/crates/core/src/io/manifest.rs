use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::diagnostics::{DiagnosticsOptions, Tolerances};
use crate::solver::{RunOutcome, RunStats, SolverConfig};

/// Record of one simulation: inputs, resolved settings and produced files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// Hex digest of the emitted scenario text.
    pub scenario_hash: String,
    pub code_version: String,
    pub refine: u32,
    pub seed: Option<u64>,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsOptions,
    /// Diagnostic tolerances resolved against the produced history.
    pub tolerances: Option<Tolerances>,
    /// `completed`, `dt_underflow`, `event_limit` or `error`.
    pub outcome: String,
    pub run_outcome: Option<RunOutcome>,
    pub error: Option<String>,
    pub stats: Option<RunStats>,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn code_version() -> String {
        env!("CARGO_PKG_VERSION").to_string()
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| IoError::Json(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| IoError::Json(e.to_string()))
    }
}
