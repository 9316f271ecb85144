use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use momnet::io::{write_pgm, write_trace_csv, write_vector_csv};
use momnet::{Image, Trace};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one invocation, written next to its artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: u64,
    pub output_dir: String,
    pub arguments: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// SHA-256 per artifact. Traces are hashed with their wall-clock column blanked.
    pub artifacts: BTreeMap<String, String>,
}

/// Output directory that records a checksum for every file written through it.
pub struct OutputDir {
    root: PathBuf,
    artifacts: BTreeMap<String, String>,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: BTreeMap::new(),
            started: unix_now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn store(&mut self, name: &str, bytes: &[u8], checksum: String) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.insert(name.to_string(), checksum);
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.store(name, bytes, sha256_hex(bytes))
    }

    pub fn write_pgm(&mut self, name: &str, img: &Image) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_pgm(img, 0.0, 1.0, &mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_vector(&mut self, name: &str, values: &[f64]) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_vector_csv(values, &mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_trace(&mut self, name: &str, trace: &Trace) -> Result<(), CliError> {
        let mut full = Vec::new();
        write_trace_csv(trace, true, &mut full)?;
        let mut blanked = Vec::new();
        write_trace_csv(trace, false, &mut blanked)?;
        self.store(name, &full, sha256_hex(&blanked))
    }

    pub fn finish(self, command: &str, config: Option<&Path>, seed: u64) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.map(|p| p.display().to_string()),
            seed,
            output_dir: self.root.display().to_string(),
            arguments: std::env::args().collect(),
            started_unix: self.started,
            finished_unix: unix_now(),
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
