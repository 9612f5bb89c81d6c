//! Run manifests: the argument vector, the resolved configuration and content
//! hashes of every input and output. Manifests carry no timestamps, so two
//! identical runs write identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::failure::{Classify, CliResult, ExitClass};

pub const MANIFEST_FILE: &str = "manifest.json";

/// SHA-256 over `blob {len}\0` followed by the content, as git hashes blobs.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, verbatim.
    pub argv: Vec<String>,
    pub rng_seed: u64,
    pub config: RunConfig,
    /// Input path as given → content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output file name inside the output directory → content hash.
    pub outputs: BTreeMap<String, String>,
}

/// Collects artifacts for one run and writes them with the manifest.
pub struct RunOutput {
    dir: PathBuf,
    manifest: Manifest,
}

impl RunOutput {
    pub fn new(command: &str, argv: &[String], config: &RunConfig) -> CliResult<Self> {
        let dir = config.output_dir().to_path_buf();
        std::fs::create_dir_all(&dir)
            .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", dir.display()))
            .or_class(ExitClass::Internal)?;
        Ok(RunOutput {
            dir,
            manifest: Manifest {
                tool: "srisk".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                argv: argv.to_vec(),
                rng_seed: config.train.rng_seed,
                config: config.clone(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
        })
    }

    pub fn record_input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))
            .or_class(ExitClass::Data)?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), blob_hash(&bytes));
        Ok(())
    }

    pub fn write(&mut self, name: &str, content: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
            .or_class(ExitClass::Internal)?;
        self.manifest.outputs.insert(name.into(), blob_hash(content));
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn finish(self) -> CliResult<Manifest> {
        let mut json = serde_json::to_vec_pretty(&self.manifest).or_class(ExitClass::Internal)?;
        json.push(b'\n');
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, json)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
            .or_class(ExitClass::Internal)?;
        Ok(self.manifest)
    }
}
