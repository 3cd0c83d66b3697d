use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::TrainConfig;

pub const SKIP_SPAN_OUT_OF_WINDOW: &str = "span_out_of_window";

/// Epoch-average losses measured on the batches as they were trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub nll: f64,
    pub kd: f64,
}

/// Everything needed to reproduce and audit one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub label: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub config_digest: String,
    /// Input name to SHA-256 digest, recorded before training starts.
    pub corpus_digests: BTreeMap<String, String>,
    /// Checkpoint file names relative to the run directory.
    pub checkpoints: Vec<String>,
    pub loss_curve: Vec<EpochLoss>,
    pub skips: BTreeMap<String, usize>,
}

impl RunManifest {
    pub fn new(label: impl Into<String>, config: &TrainConfig, corpus_digests: BTreeMap<String, String>) -> Self {
        RunManifest {
            label: label.into(),
            seed: config.seed,
            config: config.clone(),
            config_digest: config.digest(),
            corpus_digests,
            checkpoints: Vec::new(),
            loss_curve: Vec::new(),
            skips: BTreeMap::new(),
        }
    }

    /// Fails unless `config` and the inputs match the ones this run recorded.
    pub fn verify_resume(&self, config: &TrainConfig, corpus_digests: &BTreeMap<String, String>) -> Result<()> {
        if self.config_digest != config.digest() {
            return Err(Error::InvalidConfig(format!(
                "config digest {} does not match recorded {}",
                config.digest(),
                self.config_digest
            )));
        }
        if &self.corpus_digests != corpus_digests {
            return Err(Error::InvalidConfig("input digests differ from the recorded run".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
