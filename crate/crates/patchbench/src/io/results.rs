//! Results persistence: line-delimited record files and run manifests.
//!
//! Record lines are deterministic given identical inputs; the manifest
//! carries everything run-specific (timestamps, wall times) and is excluded
//! from byte-identity comparisons.

use super::IoError;
use crate::sweeps::SweepRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Links a results file to the configuration, seed, code version and patch
/// that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub results_schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub detector_id: String,
    #[serde(default)]
    pub patch_meta: Option<super::PatchSidecar>,
    pub created_unix: u64,
    /// Per-point wall times in record order.
    #[serde(default)]
    pub wall_times: Vec<f64>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config_hash: String, seed: u64, detector_id: String) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            results_schema_version: crate::sweeps::RESULTS_SCHEMA_VERSION,
            config_hash,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            detector_id,
            patch_meta: None,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_times: Vec::new(),
            extra: BTreeMap::new(),
        }
    }
}

/// SHA-256 of the canonical JSON serialization, as lowercase hex.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes one JSON record per line.
pub fn write_records(path: &Path, records: &[SweepRecord]) -> Result<(), IoError> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| IoError::file(path, e))?,
    );
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| IoError::parse(path, e))?;
        writeln!(f, "{line}").map_err(|e| IoError::file(path, e))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>, IoError> {
    let f = std::fs::File::open(path).map_err(|e| IoError::file(path, e))?;
    let reader = std::io::BufReader::new(f);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SweepRecord = serde_json::from_str(&line)
            .map_err(|e| IoError::parse(path, format!("line {}: {e}", i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| IoError::parse(path, e))?;
    std::fs::write(path, json).map_err(|e| IoError::file(path, e))
}
