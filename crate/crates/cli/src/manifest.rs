//! Run manifest: SHA-256 digests of everything that went in and came out,
//! the fully materialized configuration, and per-stage wall times. Two runs
//! with the same config and seed agree on every field except the timings.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    use std::fmt::Write;
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::runtime("digest", format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub seed: u64,
    /// Digest of the config file exactly as read from disk.
    pub config_digest: String,
    /// The configuration with every default filled in, so a run is
    /// self-describing even when the config file omitted sections.
    pub resolved_config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    /// Keyed by path relative to the output directory.
    pub output_digests: BTreeMap<String, String>,
    /// Informational only; excluded from reproducibility comparisons.
    pub stage_timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    /// Digest the config file and every input it names.
    pub fn for_run(config: &PipelineConfig, config_path: &Path, seed: u64) -> Result<RunManifest, CliError> {
        let mut input_digests = BTreeMap::new();
        for (key, path) in config.input_files() {
            input_digests.insert(key, digest_file(&path)?);
        }
        Ok(RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            seed,
            config_digest: digest_file(config_path)?,
            resolved_config: serde_json::to_value(config)
                .map_err(|e| CliError::runtime("manifest", e))?,
            input_digests,
            output_digests: BTreeMap::new(),
            stage_timings_ms: BTreeMap::new(),
        })
    }

    /// The manifest with timing fields removed — what reproducibility
    /// comparisons should look at.
    pub fn reproducible_view(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        value.as_object_mut().unwrap().remove("stage_timings_ms");
        value
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

/// Accumulates named stage durations while the pipeline runs.
pub struct StageClock {
    timings: BTreeMap<String, f64>,
}

impl StageClock {
    pub fn new() -> StageClock {
        StageClock { timings: BTreeMap::new() }
    }

    pub fn stage<T>(
        &mut self,
        name: &str,
        body: impl FnOnce() -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let started = Instant::now();
        let out = body()?;
        self.timings
            .insert(name.to_string(), started.elapsed().as_secs_f64() * 1e3);
        Ok(out)
    }

    pub fn into_timings(self) -> BTreeMap<String, f64> {
        self.timings
    }
}

impl Default for StageClock {
    fn default() -> Self {
        Self::new()
    }
}
