use serde::{Deserialize, Serialize};

use crate::distill::{ImpuritySign, Objective, SelectiveStrategy};
use crate::error::{Error, Result};
use crate::hashing::sha256_hex;
use crate::model::{ModelConfig, INIT_STD};
use crate::train::AdamWConfig;

/// Settings shared by teacher training and student distillation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub selective_strategy: SelectiveStrategy,
    /// Teacher ids used for distillation; empty means every supplied store.
    pub teacher_set: Vec<String>,
    /// Model shape; `vocab_size` is filled in from the training vocabulary.
    pub model: ModelConfig,
    pub optimizer: AdamWConfig,
    /// Global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 8,
            seed: 0,
            tau: crate::distill::DEFAULT_TAU,
            lambda1: crate::distill::DEFAULT_LAMBDA1,
            lambda2: crate::distill::DEFAULT_LAMBDA2,
            selective_strategy: SelectiveStrategy::Impurity { sign: ImpuritySign::Positive },
            teacher_set: Vec::new(),
            model: ModelConfig::default(),
            optimizer: AdamWConfig { learning_rate: 3e-3, ..AdamWConfig::default() },
            clip_norm: Some(5.0),
            init_std: INIT_STD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig(format!("clip_norm must be positive, got {c}")));
            }
        }
        if !(self.init_std >= 0.0) {
            return Err(Error::InvalidConfig(format!("init_std={}", self.init_std)));
        }
        self.objective().validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.optimizer.validate()
    }

    pub fn objective(&self) -> Objective {
        Objective { tau: self.tau, lambda1: self.lambda1, lambda2: self.lambda2 }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_and_digest() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.digest(), TrainConfig::default().digest());
        let c2 = TrainConfig { seed: 1, ..c.clone() };
        assert_ne!(c.digest(), c2.digest());
        for bad in [
            TrainConfig { epochs: 0, ..c.clone() },
            TrainConfig { batch_size: 0, ..c.clone() },
            TrainConfig { tau: 0.0, ..c.clone() },
            TrainConfig { lambda2: -1.0, ..c.clone() },
            TrainConfig { clip_norm: Some(0.0), ..c.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
