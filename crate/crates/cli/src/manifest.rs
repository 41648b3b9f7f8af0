//! Run manifests: enough provenance to reproduce a run byte-for-byte.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub netspec: FileRef,
    pub weights: Vec<FileRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tta: String,
    pub compress: String,
    pub fill: bool,
    pub size: usize,
    pub images: Vec<FileRef>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn file_ref(path: &Path) -> Result<FileRef> {
    Ok(FileRef { path: path.display().to_string(), sha256: sha256_file(path)? })
}

/// Serializes the manifest to `<dir>/manifest.json` atomically.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    let target = dir.join("manifest.json");
    let tmp = dir.join("manifest.json.tmp-write");
    std::fs::write(&tmp, text.as_bytes())?;
    std::fs::rename(&tmp, &target)?;
    Ok(())
}
