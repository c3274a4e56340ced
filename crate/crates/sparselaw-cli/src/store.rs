//! Append-only results store for sweeps.
//!
//! One JSON object per line with a schema-version field, so a crashed sweep
//! leaves at most one truncated line, which readers tolerate at end of file.
//! Rows are keyed by a content hash of the canonical configuration text;
//! per-run seeds derive from the same hash so results do not depend on
//! enumeration or completion order.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const STORE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreRow {
    pub schema_version: u32,
    pub config_hash: String,
    pub config_index: usize,
    pub runner: String,
    pub seed: u64,
    pub label: String,
    pub dense_fraction: f64,
    pub prune_fraction: f64,
    pub sparsity: f64,
    pub total_compute: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<u64>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_params: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_nonzero_params: Option<u64>,
}

impl StoreRow {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

pub fn append_row(path: &Path, row: &StoreRow) -> Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening results store {}", path.display()))?;
    let mut line = serde_json::to_string(row)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    Ok(())
}

/// Reads all rows. A truncated final line (crashed writer) is skipped; a
/// malformed line anywhere else is an error.
pub fn read_rows(path: &Path) -> Result<Vec<StoreRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<StoreRow>(line) {
            Ok(row) => rows.push(row),
            Err(e) if i + 1 == lines.len() => {
                eprintln!("warning: ignoring truncated final store line: {e}");
            }
            Err(e) => bail!("{}: line {}: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

/// Hex content hash (truncated SHA-256) of a canonical configuration string.
pub fn content_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Stable per-run seed from the global seed and the canonical configuration.
pub fn derive_seed(global_seed: u64, canonical: &str) -> u64 {
    let digest = Sha256::digest(format!("{global_seed}|{canonical}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
