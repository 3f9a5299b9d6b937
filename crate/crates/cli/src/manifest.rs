//! Append-only run manifests.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TORUS_POLYMER_OUT_DIR";

pub const MANIFEST_FILE: &str = "manifests.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub config_fingerprint: String,
    pub version: String,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputDigest>,
}

pub fn output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Relative paths are placed under [`output_dir`]. Existing files are never
/// overwritten, so each output belongs to exactly one manifest.
pub fn prepare_output(path: &Path) -> Result<PathBuf> {
    let full = match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    };
    if full.exists() {
        return Err(CliError::Usage(format!(
            "{} already exists; outputs are never overwritten",
            full.display()
        )));
    }
    if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Ok(full)
}

pub fn digest_file(path: &Path) -> Result<OutputDigest> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(OutputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Appends one JSON line to `manifests.jsonl` in the output directory.
pub fn append_manifest(manifest: &RunManifest) -> Result<PathBuf> {
    let dir = output_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io(&path, e))?;
    let line = serde_json::to_string(manifest).expect("serializable manifest");
    writeln!(file, "{line}").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
