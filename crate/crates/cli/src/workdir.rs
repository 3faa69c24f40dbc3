//! Work directory: lock, versioned manifest and artifact paths.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use dstkit::jsonl;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Completed stages and the files each produced, relative to the work dir.
    pub stages: BTreeMap<String, Vec<String>>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            stages: BTreeMap::new(),
        }
    }
}

/// An open, locked work directory. The lock is released on drop.
#[derive(Debug)]
pub struct WorkDir {
    root: PathBuf,
    manifest: Manifest,
}

impl WorkDir {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| {
            CliError::data(format!("cannot create work dir {}: {e}", root.display()))
        })?;
        let lock = root.join(LOCK_FILE);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::config(format!(
                        "work dir {} is in use by another run (remove {} if that run is gone)",
                        root.display(),
                        lock.display()
                    ))
                } else {
                    CliError::data(format!("cannot lock {}: {e}", lock.display()))
                }
            })?;
        let _ = writeln!(f, "{}", std::process::id());
        let mut dir = Self {
            root: root.to_path_buf(),
            manifest: Manifest::default(),
        };
        let path = root.join(MANIFEST_FILE);
        if path.exists() {
            let manifest: Manifest = jsonl::read_json(&path)?;
            if manifest.schema_version != SCHEMA_VERSION {
                return Err(CliError::data(format!(
                    "{} has schema version {}, expected {SCHEMA_VERSION}",
                    path.display(),
                    manifest.schema_version
                )));
            }
            dir.manifest = manifest;
        }
        Ok(dir)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of an input artifact, or a data error naming the stage that makes it.
    pub fn input(&self, rel: &str, made_by: &str) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::data(format!(
                "{} is missing; run `{made_by}` first",
                p.display()
            )))
        }
    }

    pub fn record_stage(&mut self, stage: &str, outputs: &[&str]) -> Result<(), CliError> {
        self.manifest.stages.insert(
            stage.to_string(),
            outputs.iter().map(|s| s.to_string()).collect(),
        );
        jsonl::write_json(&self.path(MANIFEST_FILE), &self.manifest)?;
        Ok(())
    }

    #[cfg(test)]
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
}

impl Drop for WorkDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}
