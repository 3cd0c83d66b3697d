//! Compact span-extraction encoder with start/end heads and a hand-written
//! backward pass.

mod checkpoint;
pub(crate) use checkpoint::Cursor as checkpoint_cursor;
mod config;
mod encoder;
mod params;
mod vocab;

pub use checkpoint::{BundleMeta, ModelBundle, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use encoder::{ForwardOutput, ForwardPass, MASKED_LOGIT};
pub use params::{LayerParams, SpanModel, SpanParams, INIT_STD};
pub use vocab::{tokenize_and_index, EncodedInput, Vocabulary, OOV_BUCKETS, PAD_ID, SEP_ID, START_ID};
