//! Run manifests: what was run, with which configuration, and the hashes
//! of everything written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{config_err, runtime_err, Context, Failure};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON form of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub outputs: Vec<OutputFile>,
    #[serde(default)]
    pub results: serde_json::Value,
}

impl Manifest {
    pub fn replay_config(&self) -> Result<RunConfig, Failure> {
        serde_json::from_value(self.config.clone())
            .map_err(|e| config_err(format!("manifest config: {e}")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files under the run directory.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Outputs, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| runtime_err(format!("{}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
        self.files.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_vec_pretty(value).map_err(runtime_err)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` describing the run.
    pub fn finish(
        self,
        ctx: &Context,
        config: &RunConfig,
        seed: Option<u64>,
        results: serde_json::Value,
    ) -> Result<(), Failure> {
        let config = serde_json::to_value(config).map_err(runtime_err)?;
        let canonical = serde_json::to_vec(&config).map_err(runtime_err)?;
        let manifest = Manifest {
            tool: "g3m".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: ctx.command.into(),
            config_hash: sha256_hex(&canonical),
            config,
            seed,
            threads: ctx.threads,
            outputs: self.files,
            results,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(runtime_err)?;
        text.push(b'\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| runtime_err(format!("{}: {e}", path.display())))
    }
}
