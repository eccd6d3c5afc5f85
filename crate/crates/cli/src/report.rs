//! Consolidation of run manifests into one verdict table.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use navsto::verifier::Verdict;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::manifest::{sha256_hex, Outcome, RunManifest};

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Run directories or their `manifest.json` files.
    pub manifests: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub hash: String,
    pub command: String,
    /// Verdict recorded by the run.
    pub recorded: Verdict,
    /// Verdict after the artifact audit.
    pub verdict: Verdict,
    pub missing: Vec<String>,
    pub modified: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
    pub duplicates: usize,
    pub verdict: Verdict,
}

fn run_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

/// Checks every listed artifact against its recorded hash.
fn audit(dir: &Path, m: &RunManifest) -> ReportEntry {
    let mut missing = Vec::new();
    let mut modified = Vec::new();
    for a in &m.artifacts {
        match fs::read(dir.join(&a.path)) {
            Ok(bytes) if sha256_hex(&bytes) == a.sha256 => {}
            Ok(_) => modified.push(a.path.clone()),
            Err(_) => missing.push(a.path.clone()),
        }
    }
    let audited = if missing.is_empty() && modified.is_empty() {
        m.verdict
    } else {
        m.verdict.combine(Verdict::Inconclusive)
    };
    ReportEntry {
        hash: m.hash.clone(),
        command: m.command.clone(),
        recorded: m.verdict,
        verdict: audited,
        missing,
        modified,
    }
}

/// Merges the manifests: duplicates (same hash) count once, any fail
/// dominates, then inconclusive; an empty list passes.
pub fn consolidate(paths: &[PathBuf]) -> Result<Report> {
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    let mut duplicates = 0;
    for p in paths {
        let m = RunManifest::load(p)?;
        if !seen.insert(m.hash.clone()) {
            duplicates += 1;
            continue;
        }
        entries.push(audit(&run_dir(p), &m));
    }
    let verdict = entries.iter().fold(Verdict::Pass, |v, e| v.combine(e.verdict));
    Ok(Report {
        entries,
        duplicates,
        verdict,
    })
}

pub fn summary(r: &Report) -> String {
    let mut s = format!("report: {} runs ({} duplicates dropped)\n", r.entries.len(), r.duplicates);
    for e in &r.entries {
        s.push_str(&format!("  {:<13} {:<20} {}", e.verdict.to_string(), e.command, &e.hash[..16]));
        if !e.missing.is_empty() {
            s.push_str(&format!("  missing: {}", e.missing.join(", ")));
        }
        if !e.modified.is_empty() {
            s.push_str(&format!("  modified: {}", e.modified.join(", ")));
        }
        s.push('\n');
    }
    s
}

/// Returns the outcome and the arguments that identify it (the sorted member
/// hashes, so the same set of runs always lands in the same directory).
pub fn run(a: &ReportArgs) -> Result<(Outcome, Value)> {
    let report = consolidate(&a.manifests)?;
    let text = summary(&report);
    let mut out = Outcome::new(report.verdict, text.clone());
    out.add("report.json", serde_json::to_string_pretty(&report)?);
    out.add("summary.txt", text);
    let mut members: Vec<&str> = report.entries.iter().map(|e| e.hash.as_str()).collect();
    members.sort_unstable();
    Ok((out, json!({ "members": members })))
}
