use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, SpanModel, SpanParams, Vocabulary};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LBMRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance stored in a checkpoint header.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub label: String,
    pub seed: u64,
    /// Passage/question languages seen in training; zero-shot checks consult it.
    pub training_languages: Vec<String>,
    /// Passage languages seen in training; routing by passage language uses it.
    pub passage_languages: Vec<String>,
}

/// A model together with the vocabulary that indexes its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<T> {
    pub model: SpanModel<T>,
    pub vocab: Vocabulary,
    pub meta: BundleMeta,
}

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    seed: u64,
    label: String,
    training_languages: Vec<String>,
    passage_languages: Vec<String>,
    vocab: Vocabulary,
    blocks: Vec<BlockHeader>,
}

impl<T: Real> ModelBundle<T> {
    /// Container layout: magic, `u32` version, `u64` header length, JSON
    /// header, then each parameter block as little-endian `f64`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blocks = self.model.params.named_blocks();
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            config: self.model.config,
            seed: self.meta.seed,
            label: self.meta.label.clone(),
            training_languages: self.meta.training_languages.clone(),
            passage_languages: self.meta.passage_languages.clone(),
            vocab: self.vocab.clone(),
            blocks: blocks.iter().map(|(n, b)| BlockHeader { name: n.clone(), len: b.len() }).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * self.model.params.num_values());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, block) in blocks {
            for v in block {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let version = u32::from_le_bytes(cursor.take(4)?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let header_len = cursor.u64()? as usize;
        let header: Header = serde_json::from_slice(cursor.take(header_len)?)?;
        if header.config.vocab_size != header.vocab.size() {
            return Err(Error::Format("vocabulary does not match the model config".into()));
        }
        let mut params = SpanParams::<T>::zeros(&header.config);
        let expected: Vec<(String, usize)> =
            params.named_blocks().iter().map(|(n, b)| (n.clone(), b.len())).collect();
        if expected.len() != header.blocks.len()
            || expected.iter().zip(&header.blocks).any(|((n, l), b)| *n != b.name || *l != b.len)
        {
            return Err(Error::Format("parameter block layout mismatch".into()));
        }
        for block in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = T::lit(f64::from_le_bytes(cursor.take(8)?.try_into().expect("8 bytes")));
            }
        }
        if cursor.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after parameter blocks".into()));
        }
        Ok(ModelBundle {
            model: SpanModel::from_params(header.config, params)?,
            vocab: header.vocab,
            meta: BundleMeta {
                label: header.label,
                seed: header.seed,
                training_languages: header.training_languages,
                passage_languages: header.passage_languages,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
