//! Iteration snapshots on disk.
//!
//! Layout under the work directory:
//!
//! ```text
//! state.json           current loop state, replaced atomically
//! iter-01/             committed artifacts of iteration 1
//! .staging-iter-02/    artifacts of an iteration in progress
//! ```
//!
//! An iteration writes into its staging directory. Committing renames it and
//! then replaces `state.json`; aborting removes it, so a failed iteration
//! leaves the committed files untouched.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jsonl;

pub const STATE_FILE: &str = "state.json";

pub fn iteration_dir_name(iteration: u32) -> String {
    format!("iter-{iteration:02}")
}

#[derive(Debug, Clone)]
pub struct SnapshotStore {
    root: PathBuf,
}

/// An uncommitted iteration directory, removed on drop unless committed.
#[derive(Debug)]
pub struct Staging {
    dir: PathBuf,
    iteration: u32,
    committed: bool,
}

impl Staging {
    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

impl SnapshotStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn state_path(&self) -> PathBuf {
        self.root.join(STATE_FILE)
    }

    pub fn iteration_dir(&self, iteration: u32) -> PathBuf {
        self.root.join(iteration_dir_name(iteration))
    }

    pub fn load_state<S: DeserializeOwned>(&self) -> Result<Option<S>> {
        let path = self.state_path();
        if !path.exists() {
            return Ok(None);
        }
        jsonl::read_json(&path).map(Some)
    }

    pub fn begin(&self, iteration: u32) -> Result<Staging> {
        let dir = self
            .root
            .join(format!(".staging-{}", iteration_dir_name(iteration)));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging {
            dir,
            iteration,
            committed: false,
        })
    }

    /// Publish the staged directory and the new state.
    pub fn commit<S: Serialize>(&self, mut staging: Staging, state: &S) -> Result<PathBuf> {
        let target = self.iteration_dir(staging.iteration);
        if target.exists() {
            fs::remove_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        }
        fs::rename(&staging.dir, &target).map_err(|e| Error::io(&target, e))?;
        staging.committed = true;
        jsonl::write_json(&self.state_path(), state)?;
        Ok(target)
    }
}
