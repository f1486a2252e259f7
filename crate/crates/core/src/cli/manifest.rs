//! Run manifests: reproducibility metadata plus the pass/fail table.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionRow {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub acceptance: Vec<CriterionRow>,
    /// every effective default, so published runs are self-describing
    pub defaults: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(config_bytes);
        RunManifest {
            config_hash: format!("{:x}", h.finalize()),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            stages: vec![],
            acceptance: vec![],
            defaults: BTreeMap::new(),
            warnings: vec![],
            artifacts: vec![],
        }
    }

    pub fn all_green(&self) -> bool {
        self.stages.iter().all(|s| s.status == "ok") && self.acceptance.iter().all(|c| c.pass)
    }
}

/// Runs a named stage, recording its wall time and status.
pub struct StageRunner {
    start: Instant,
}

impl StageRunner {
    pub fn begin() -> Self {
        StageRunner { start: Instant::now() }
    }

    pub fn finish<T>(
        self,
        manifest: &mut RunManifest,
        name: &str,
        result: crate::Result<T>,
    ) -> crate::Result<T> {
        let seconds = self.start.elapsed().as_secs_f64();
        let status = match &result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        manifest.stages.push(StageTiming { name: name.to_string(), seconds, status });
        result
    }
}
