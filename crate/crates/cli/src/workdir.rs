//! Paths relative to the `--workdir` root and the `MANIFEST.json` index of
//! every artifact written there.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "MANIFEST.json";

/// How an artifact depends on wall-clock time.
pub enum Timing {
    None,
    /// The whole file is timing data.
    All,
    /// Content with the timing parts removed, hashed separately.
    Stripped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub bytes: usize,
    pub sha256: String,
    /// True when the file holds wall-clock measurements.
    pub timing: bool,
    /// Hash of the content without its timing parts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256_without_timing: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Workdir {
    root: PathBuf,
    command: String,
    written: BTreeMap<String, ManifestEntry>,
}

impl Workdir {
    pub fn new(root: &Path, command: &str) -> Result<Self, CliError> {
        if !root.is_dir() {
            return Err(CliError::validation(format!("workdir not found: {}", root.display())));
        }
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            written: BTreeMap::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Reads an input, naming it as `what` when it is missing.
    pub fn read(&self, rel: &str, what: &str) -> Result<String, CliError> {
        let p = self.path(rel);
        if !p.is_file() {
            return Err(CliError::validation(format!("{what} not found: {}", p.display())));
        }
        std::fs::read_to_string(&p).map_err(|e| CliError::runtime(format!("cannot read {}: {e}", p.display())))
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn write(&mut self, rel: &str, content: &str, timing: Timing) -> Result<(), CliError> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(&p, content).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display())))?;
        let (is_timing, stable) = match timing {
            Timing::None => (false, None),
            Timing::All => (true, None),
            Timing::Stripped(s) => (true, Some(sha256_hex(s.as_bytes()))),
        };
        self.written.insert(
            normalize(rel),
            ManifestEntry {
                command: self.command.clone(),
                bytes: content.len(),
                sha256: sha256_hex(content.as_bytes()),
                timing: is_timing,
                sha256_without_timing: stable,
            },
        );
        Ok(())
    }

    /// Merges this run's artifacts into the manifest.
    pub fn finish(self) -> Result<(), CliError> {
        let path = self.root.join(MANIFEST);
        let mut entries: BTreeMap<String, ManifestEntry> = if path.is_file() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("corrupt {}: {e}", path.display())))?
        } else {
            BTreeMap::new()
        };
        entries.extend(self.written);
        let mut text = serde_json::to_string_pretty(&entries).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }
}

fn normalize(rel: &str) -> String {
    Path::new(rel)
        .components()
        .filter(|c| !matches!(c, std::path::Component::CurDir))
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// `dir/name`, or just `name` when `dir` is empty or `.`.
pub fn join(dir: &str, name: &str) -> String {
    if dir.is_empty() || dir == "." {
        name.to_string()
    } else {
        format!("{}/{name}", dir.trim_end_matches('/'))
    }
}
