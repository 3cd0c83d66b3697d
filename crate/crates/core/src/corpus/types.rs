use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercased whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// One language's rendering of a record. The span is inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RenderingWire", into = "RenderingWire")]
pub struct Rendering {
    pub passage_tokens: Vec<String>,
    pub question_tokens: Vec<String>,
    pub answer_span: Option<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RenderingWire {
    passage_tokens: Vec<String>,
    question_tokens: Vec<String>,
    answer_start: Option<usize>,
    answer_end: Option<usize>,
}

impl From<RenderingWire> for Rendering {
    fn from(w: RenderingWire) -> Self {
        let answer_span = match (w.answer_start, w.answer_end) {
            (Some(s), Some(e)) => Some((s, e)),
            _ => None,
        };
        Rendering { passage_tokens: w.passage_tokens, question_tokens: w.question_tokens, answer_span }
    }
}

impl From<Rendering> for RenderingWire {
    fn from(r: Rendering) -> Self {
        RenderingWire {
            passage_tokens: r.passage_tokens,
            question_tokens: r.question_tokens,
            answer_start: r.answer_span.map(|s| s.0),
            answer_end: r.answer_span.map(|s| s.1),
        }
    }
}

impl Rendering {
    pub fn validate(&self) -> Result<()> {
        if let Some((start, end)) = self.answer_span {
            if start > end || end >= self.passage_tokens.len() {
                return Err(Error::InvalidRecord(format!(
                    "span ({start}, {end}) invalid for a passage of {} tokens",
                    self.passage_tokens.len()
                )));
            }
        }
        Ok(())
    }
}

/// A QA instance rendered in several languages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedRecord {
    pub id: String,
    pub source_language: String,
    pub renderings: BTreeMap<String, Rendering>,
}

impl AlignedRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.renderings.contains_key(&self.source_language) {
            return Err(Error::InvalidRecord(format!(
                "record {} lacks its source language {}",
                self.id, self.source_language
            )));
        }
        self.renderings.values().try_for_each(Rendering::validate)
    }
}

/// A single training or evaluation instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub question_tokens: Vec<String>,
    pub passage_tokens: Vec<String>,
    pub gold_start: usize,
    pub gold_end: usize,
    pub passage_lang: String,
    pub question_lang: String,
}

impl Sample {
    /// Identity of a sample across datasets and logit stores.
    pub fn key(&self) -> String {
        format!("{}|{}|{}", self.id, self.passage_lang, self.question_lang)
    }

    /// Length of `[start] question [sep] passage`.
    pub fn packed_len(&self) -> usize {
        self.question_tokens.len() + self.passage_tokens.len() + 2
    }

    pub fn gold_tokens(&self) -> &[String] {
        &self.passage_tokens[self.gold_start..=self.gold_end]
    }

    pub fn validate(&self, max_len: Option<usize>) -> Result<()> {
        if self.gold_start > self.gold_end || self.gold_end >= self.passage_tokens.len() {
            return Err(Error::InvalidRecord(format!("sample {} has an invalid gold span", self.key())));
        }
        if let Some(limit) = max_len {
            if self.packed_len() > limit {
                return Err(Error::InvalidRecord(format!(
                    "sample {} packs to {} > {limit} tokens",
                    self.key(),
                    self.packed_len()
                )));
            }
        }
        Ok(())
    }
}

/// Passages in one language paired with questions in every language.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageBranch {
    pub passage_lang: String,
    pub samples: Vec<Sample>,
}

impl LanguageBranch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
