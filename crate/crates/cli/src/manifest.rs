//! Run manifests: what went in, what came out, and how it was configured.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

pub struct Manifest {
    command: &'static str,
    config: String,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Manifest {
    /// `config` is a canonical rendering of the command's settings.
    pub fn new(command: &'static str, config: String, seed: Option<u64>) -> Self {
        Manifest {
            command,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    /// Outputs are listed by file name, relative to the manifest.
    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn config_digest(&self) -> String {
        sha256_str(&self.config)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let files = |ps: &[PathBuf], name_only: bool| -> Result<Vec<Value>> {
            ps.iter()
                .map(|p| {
                    let shown = match p.file_name() {
                        Some(n) if name_only => n.to_string_lossy().into_owned(),
                        _ => p.display().to_string(),
                    };
                    Ok(json!({ "path": shown, "sha256": sha256_file(p)? }))
                })
                .collect()
        };
        let doc = json!({
            "tool": "dollo",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "config_sha256": self.config_digest(),
            "inputs": files(&self.inputs, false)?,
            "outputs": files(&self.outputs, true)?,
        });
        fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
