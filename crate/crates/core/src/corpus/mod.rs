//! Corpus data model, answer marking and the dataset builders.

mod builders;
mod io;
mod marking;
mod synthetic;
mod types;

pub use builders::{
    build_language_branches, build_mix_dataset, build_translate_train, split_records,
    union_dataset, BranchOptions, BranchSet, BuildStats, BuiltDataset,
};
pub use io::{read_jsonl, read_records, read_samples, to_jsonl_bytes, write_jsonl};
pub use marking::{mark_answer, recover_answer, CLOSE_MARKER, OPEN_MARKER};
pub use synthetic::{generate_synthetic_corpus, translate_token, NoiseSpec, TaskSpec};
pub use types::{tokenize, AlignedRecord, LanguageBranch, Rendering, Sample};
