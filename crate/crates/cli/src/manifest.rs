//! Run manifests and content-addressed output directories.
//!
//! The directory name is derived from everything that determines the
//! artifacts (subcommand, arguments, canonical config, seed range, tool
//! version); wall-clock data lives only in `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use navsto::verifier::Verdict;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Inputs that fully determine a run's artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct RunKey {
    pub command: String,
    pub args: Value,
    /// Canonical config text, absent for subcommands that take none.
    pub config: Option<String>,
    pub seeds: Option<[u64; 2]>,
}

impl RunKey {
    pub fn hash(&self) -> String {
        let canonical = json!({
            "command": self.command,
            "args": self.args,
            "config": self.config,
            "seeds": self.seeds,
            "version": VERSION,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub hash: String,
    pub command: String,
    pub version: String,
    pub args: Value,
    pub config: Option<String>,
    pub seeds: Option<[u64; 2]>,
    pub artifacts: Vec<ArtifactEntry>,
    pub verdict: Verdict,
    pub summary: String,
    pub workers: usize,
    pub started_unix: f64,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))
    }
}

/// What a subcommand produced, before it is written out.
pub struct Outcome {
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub verdict: Verdict,
    pub summary: String,
}

impl Outcome {
    pub fn new(verdict: Verdict, summary: impl Into<String>) -> Self {
        Outcome {
            artifacts: Vec::new(),
            verdict,
            summary: summary.into(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.artifacts.push((name.into(), bytes.into()));
    }
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes the artifacts and the manifest under `root/<command>-<hash>`.
pub fn persist(
    root: &Path,
    key: &RunKey,
    outcome: &Outcome,
    workers: usize,
    started_unix: f64,
    wall_clock_s: f64,
) -> Result<(PathBuf, RunManifest)> {
    let hash = key.hash();
    let dir = root.join(format!("{}-{}", key.command, &hash[..16]));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut artifacts = Vec::with_capacity(outcome.artifacts.len());
    for (name, bytes) in &outcome.artifacts {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        artifacts.push(ArtifactEntry {
            path: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = RunManifest {
        hash,
        command: key.command.clone(),
        version: VERSION.to_string(),
        args: key.args.clone(),
        config: key.config.clone(),
        seeds: key.seeds,
        artifacts,
        verdict: outcome.verdict,
        summary: outcome.summary.clone(),
        workers,
        started_unix,
        wall_clock_s,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok((dir, manifest))
}
