//! Artifact files and the run manifest. Every file is written to a temporary
//! name in the output directory and renamed into place; the manifest is
//! written last.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Result, RunError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Complete,
    /// The run stopped early; the listed artifacts are what was written.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: RunConfig,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<Timing>,
    pub wall_seconds: f64,
}

pub fn version_string() -> String {
    format!("qdsim {}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| RunError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| RunError::io(&target, e))?;
    tmp.as_file().sync_all().map_err(|e| RunError::io(&target, e))?;
    tmp.persist(&target).map_err(|e| RunError::io(&target, e.error))?;
    Ok(())
}

/// Collects artifacts for one run.
pub struct ArtifactWriter {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    timings: Vec<Timing>,
    started: Instant,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), artifacts: Vec::new(), timings: Vec::new(), started: Instant::now() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST || self.artifacts.iter().any(|a| a.path == name) {
            return Err(RunError::io(&self.dir.join(name), std::io::Error::new(std::io::ErrorKind::AlreadyExists, "artifact name reused")));
        }
        write_atomic(&self.dir, name, bytes)?;
        self.artifacts.push(Artifact { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::io(&self.dir.join(name), e.into()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| RunError::io(&path, std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::io(&path, std::io::Error::other(e.to_string())))?;
        self.write_bytes(name, &bytes)
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self);
        self.timings.push(Timing { stage: stage.to_string(), wall_seconds: t.elapsed().as_secs_f64() });
        out
    }

    /// Write the manifest; `error` marks the run as partial.
    pub fn finish(self, config: &RunConfig, error: Option<String>) -> Result<RunManifest> {
        let manifest = RunManifest {
            version: version_string(),
            status: if error.is_some() { RunStatus::Partial } else { RunStatus::Complete },
            error,
            config: config.clone(),
            artifacts: self.artifacts,
            timings: self.timings,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::io(&self.dir.join(MANIFEST), e.into()))?;
        text.push('\n');
        write_atomic(&self.dir, MANIFEST, text.as_bytes())?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::Check(format!("{}: {e}", path.display())))
}

/// Verify every listed artifact against its checksum.
pub fn check(dir: &Path) -> Result<RunManifest> {
    let m = read_manifest(dir)?;
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for a in &m.artifacts {
        if !seen.insert(&a.path) {
            problems.push(format!("{} listed twice", a.path));
            continue;
        }
        match std::fs::read(dir.join(&a.path)) {
            Ok(bytes) if sha256_hex(&bytes) == a.sha256 => {}
            Ok(_) => problems.push(format!("{} checksum mismatch", a.path)),
            Err(e) => problems.push(format!("{}: {e}", a.path)),
        }
    }
    if m.status != RunStatus::Complete {
        problems.push(format!("run is partial: {}", m.error.as_deref().unwrap_or("unknown error")));
    }
    if problems.is_empty() {
        Ok(m)
    } else {
        Err(RunError::Check(problems.join("; ")))
    }
}
