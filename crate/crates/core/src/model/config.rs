use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a [`SpanModel`](crate::model::SpanModel).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub ff: usize,
    /// Padded input length; also the length of the per-position head biases.
    pub max_len: usize,
    pub layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { vocab_size: 0, hidden: 32, ff: 64, max_len: 64, layers: 2 }
    }
}

impl ModelConfig {
    pub fn with_vocab_size(self, vocab_size: usize) -> Self {
        ModelConfig { vocab_size, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.hidden == 0 || self.ff == 0 || self.max_len < 3 {
            return Err(Error::InvalidConfig(format!("degenerate model config {self:?}")));
        }
        if self.hidden % 2 != 0 {
            return Err(Error::InvalidConfig("hidden size must be even for the sinusoidal table".into()));
        }
        Ok(())
    }
}
