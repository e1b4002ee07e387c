//! Run manifest: config digest, tool version, seed, timestamps, and the
//! sha256 of every emitted artifact, making runs traceable.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("digesting {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct ManifestBuilder {
    config_digest: String,
    seed: u64,
    started_unix: u64,
    outputs: Vec<(PathBuf, String)>,
}

impl ManifestBuilder {
    pub fn new(config_path: &Path, seed: u64) -> Result<ManifestBuilder> {
        Ok(ManifestBuilder {
            config_digest: digest_file(config_path)?,
            seed,
            started_unix: now_unix(),
            outputs: Vec::new(),
        })
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    /// Registers an already-written artifact.
    pub fn add(&mut self, path: &Path) -> Result<()> {
        let digest = digest_file(path)?;
        self.outputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn write(self, out_dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: self.config_digest,
            seed: self.seed,
            started_unix: self.started_unix,
            finished_unix: now_unix(),
            outputs: self
                .outputs
                .into_iter()
                .map(|(path, sha256)| ArtifactEntry {
                    path: path.display().to_string(),
                    sha256,
                })
                .collect(),
        };
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
