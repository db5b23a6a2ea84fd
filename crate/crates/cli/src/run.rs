//! Result directories and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Every resolved setting, defaults included.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub kernel_cache_hash: Option<String>,
    pub kernel_cache_hit: Option<bool>,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

/// One run: `<root>/<run-id>/` plus the manifest being assembled.
pub struct Run {
    dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
    finished: bool,
}

/// `<command>-<first 12 hex digits of sha256(command, config)>`.
pub fn default_run_id(command: &str, config: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(config.to_string().as_bytes());
    let digest = hex::encode(h.finalize());
    format!("{command}-{}", &digest[..12])
}

impl Run {
    pub fn create(
        root: &Path,
        run_id: Option<&str>,
        command: &str,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let id = match run_id {
            Some(id) if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." => {
                return Err(CliError::Usage(format!("bad run id '{id}'")));
            }
            Some(id) => id.to_string(),
            None => default_run_id(command, &config),
        };
        let dir = root.join(id);
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            started: Instant::now(),
            manifest: RunManifest {
                command: command.into(),
                argv: std::env::args().collect(),
                config,
                seed,
                version: env!("CARGO_PKG_VERSION").into(),
                kernel_cache_hash: None,
                kernel_cache_hit: None,
                threads: rayon::current_num_threads(),
                outputs: Vec::new(),
                pass: false,
                wall_clock_seconds: 0.0,
            },
            finished: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn record(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.dir).unwrap_or(path);
        self.manifest.outputs.push(rel.display().to_string());
    }

    pub fn record_all(&mut self, paths: &[PathBuf]) {
        for p in paths {
            self.record(p);
        }
    }

    pub fn set_cache(&mut self, hash: &str, hit: bool) {
        self.manifest.kernel_cache_hash = Some(hash.into());
        self.manifest.kernel_cache_hit = Some(hit);
    }

    /// Writes pretty JSON to `name` and records it.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, serde_json::to_vec_pretty(value)?)?;
        self.record(&path);
        Ok(path)
    }

    /// Writes `manifest.json`; returns its path.
    pub fn finish(mut self, pass: bool) -> Result<PathBuf, CliError> {
        self.manifest.pass = pass;
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_vec_pretty(&self.manifest)?)?;
        self.finished = true;
        Ok(path)
    }
}

impl Drop for Run {
    /// An aborted run leaves no empty directory behind.
    fn drop(&mut self) {
        if !self.finished {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_depends_on_config() {
        let a = default_run_id("simulate", &serde_json::json!({"seed": 1}));
        let b = default_run_id("simulate", &serde_json::json!({"seed": 2}));
        assert_ne!(a, b);
        assert_eq!(a, default_run_id("simulate", &serde_json::json!({"seed": 1})));
        assert!(a.starts_with("simulate-") && a.len() == "simulate-".len() + 12);
    }

    #[test]
    fn rejects_path_like_ids() {
        let dir = tempfile::tempdir().unwrap();
        let r = Run::create(dir.path(), Some("../x"), "kernel", serde_json::json!({}), None);
        assert!(matches!(r, Err(CliError::Usage(_))));
    }
}
