use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub command: String,
    pub started_unix_seconds: u64,
    pub wall_seconds: f64,
    pub config: RunConfig,
    /// Relative path → SHA-256 of the bytes written.
    pub artifacts: BTreeMap<String, String>,
    pub model_fingerprints: BTreeMap<String, String>,
}

/// Log of every command run against a directory. Timings live only here,
/// so all other artifacts are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub commands: Vec<CommandRecord>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Latest checksum of every artifact across commands.
    pub fn artifact_checksums(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for c in &self.commands {
            out.extend(c.artifacts.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A run directory that records a checksum for every file it writes.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    started: Instant,
    started_unix: u64,
    artifacts: BTreeMap<String, String>,
    fingerprints: BTreeMap<String, String>,
}

impl RunDir {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            artifacts: BTreeMap::new(),
            fingerprints: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.write_bytes(rel, &bytes)
    }

    pub fn record_fingerprint(&mut self, name: &str, fingerprint: String) {
        self.fingerprints.insert(name.to_string(), fingerprint);
    }

    /// Appends this command to the directory manifest.
    pub fn finish(self, command: &str, config: &RunConfig) -> Result<RunManifest> {
        let mut manifest = RunManifest::load(&self.root)?;
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
        manifest.commands.push(CommandRecord {
            command: command.to_string(),
            started_unix_seconds: self.started_unix,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            config: config.clone(),
            artifacts: self.artifacts,
            model_fingerprints: self.fingerprints,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}
