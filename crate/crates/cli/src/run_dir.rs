//! Layout of a run directory and the lock guarding it.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use relaypb::io::{read_events_csv, read_snapshots, RunManifest};
use relaypb::scenario::{parse_config, ScenarioSpec};
use relaypb::RunOutput;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const SCENARIO: &str = "scenario.toml";
pub const SNAPSHOTS: &str = "snapshots.bin";
pub const EVENTS: &str = "events.csv";
pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".lock";

pub fn scenario_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, Failure> {
        let path = dir.join(LOCK);
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Failure::Runtime(format!(
                    "{} is in use by another simulation (remove {} if it is stale)",
                    dir.display(),
                    path.display()
                ))
            } else {
                Failure::Runtime(format!("cannot lock {}: {e}", dir.display()))
            }
        })?;
        writeln!(file, "{}", std::process::id())?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// A completed `simulate` directory, read back.
pub struct RunDir {
    pub spec: ScenarioSpec,
    pub manifest: RunManifest,
    pub output: RunOutput,
}

impl RunDir {
    pub fn open(dir: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(dir.join(SCENARIO))
            .map_err(|e| Failure::Config(format!("{}: {e}", dir.join(SCENARIO).display())))?;
        let spec = parse_config(&text)?.spec;
        let manifest = RunManifest::read(&dir.join(MANIFEST))?;
        if manifest.scenario_hash != scenario_hash(&text) {
            return Err(Failure::Config(format!("{} does not match its manifest", dir.join(SCENARIO).display())));
        }
        let outcome = manifest
            .run_outcome
            .clone()
            .ok_or_else(|| Failure::Runtime(format!("run in {} did not produce output", dir.display())))?;
        let (u, h) = read_snapshots(&dir.join(SNAPSHOTS))?;
        let events = read_events_csv(&dir.join(EVENTS))?;
        let stats = manifest.stats.unwrap_or_default();
        Ok(Self {
            spec,
            manifest,
            output: RunOutput {
                u,
                h,
                events,
                outcome,
                stats,
            },
        })
    }
}
