//! Artifact locations under the output directory.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    pub fn corpus_digest(&self) -> PathBuf {
        self.root.join("corpus.sha256")
    }

    pub fn split(&self, part: &str) -> PathBuf {
        self.root.join("build").join(format!("{part}_records.jsonl"))
    }

    pub fn build_dir(&self, mode: &str) -> PathBuf {
        self.root.join("build").join(mode)
    }

    pub fn branch(&self, lang: &str) -> PathBuf {
        self.build_dir("lbmrc").join(format!("{lang}.jsonl"))
    }

    pub fn union(&self) -> PathBuf {
        self.build_dir("lbmrc").join("union.jsonl")
    }

    pub fn mix(&self) -> PathBuf {
        self.build_dir("mixmrc").join("mix.jsonl")
    }

    pub fn translate_train(&self, lang: &str) -> PathBuf {
        self.build_dir("translate-train").join(format!("{lang}.jsonl"))
    }

    pub fn run_dir(&self, label: &str) -> PathBuf {
        self.root.join("runs").join(label)
    }

    pub fn checkpoint(&self, label: &str) -> PathBuf {
        self.run_dir(label).join("model.ckpt")
    }

    pub fn manifest(&self, label: &str) -> PathBuf {
        self.run_dir(label).join("manifest.json")
    }

    pub fn logits(&self, teacher: &str) -> PathBuf {
        self.root.join("logits").join(format!("{teacher}.logits"))
    }

    pub fn report(&self, label: &str, ext: &str) -> PathBuf {
        self.root.join("reports").join(format!("{label}.{ext}"))
    }
}

/// Fails with the missing-artifact exit code unless `path` exists.
pub fn require(path: &Path) -> CliResult<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::missing(path))
    }
}

pub fn ensure_parent(path: &Path) -> CliResult {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}
