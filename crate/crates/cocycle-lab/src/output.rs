//! Output files and the run manifest. Every file is written to a temporary
//! sibling and renamed into place, so a crash never leaves a truncated file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Writes `bytes` to `path` atomically (temporary file, fsync, rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize>(value: &S) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serialisable");
    v.push(b'\n');
    v
}

/// Shortest round-tripping decimal form, switching to exponent notation for
/// very small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Formats an optional number; missing values become empty CSV cells.
pub fn cell<D: std::fmt::Display>(v: Option<D>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskStatus {
    pub task: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Provenance record written next to the outputs of every command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub threads: usize,
    pub config: RunConfig,
    pub tasks: Vec<TaskStatus>,
    pub outputs: Vec<OutputDigest>,
    /// Edge brackets visited by bisection, when an edge search ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket_history: Option<Vec<(f64, f64)>>,
}

/// Collects outputs and task statuses during a command.
pub struct Run {
    pub dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str, config: &RunConfig) -> Self {
        Self {
            dir: config.output.dir.clone(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: config.hash(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                started: chrono::Utc::now().to_rfc3339(),
                finished: String::new(),
                threads: rayon::current_num_threads(),
                config: config.clone(),
                tasks: Vec::new(),
                outputs: Vec::new(),
                bracket_history: None,
            },
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes an output file atomically and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.retain(|o| o.path != name);
        self.manifest.outputs.push(OutputDigest { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(path)
    }

    pub fn task(&mut self, task: impl Into<String>, status: &str, detail: Option<String>) {
        self.manifest.tasks.push(TaskStatus { task: task.into(), status: status.to_string(), detail });
    }

    pub fn set_bracket_history(&mut self, history: Vec<(f64, f64)>) {
        self.manifest.bracket_history = Some(history);
    }

    /// Writes `manifest.json` (or `<command>.manifest.json`).
    pub fn finish(mut self) -> Result<(), CliError> {
        self.manifest.finished = chrono::Utc::now().to_rfc3339();
        let name = format!("{}.manifest.json", self.manifest.command);
        write_atomic(&self.dir.join(name), &to_json(&self.manifest))
    }
}
