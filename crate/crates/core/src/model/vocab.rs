use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::hashing::fnv1a64;

pub const PAD_ID: usize = 0;
pub const START_ID: usize = 1;
pub const SEP_ID: usize = 2;
const OOV_BASE: usize = 3;
/// Out-of-vocabulary tokens hash into this many reserved ids.
pub const OOV_BUCKETS: usize = 100;
const FIRST_WORD_ID: usize = OOV_BASE + OOV_BUCKETS;

/// Token → id table. Ids below 103 are reserved (padding, start, separator, OOV buckets).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), FIRST_WORD_ID + i)).collect();
        Vocabulary { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    /// Every distinct question and passage token, sorted.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        let mut words: Vec<String> = samples
            .into_iter()
            .flat_map(|s| s.question_tokens.iter().chain(&s.passage_tokens))
            .cloned()
            .collect();
        words.sort();
        words.dedup();
        Vocabulary::from(words)
    }

    /// Total id space, reserved ids included.
    pub fn size(&self) -> usize {
        FIRST_WORD_ID + self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&id) => id,
            None => Self::oov_id(token),
        }
    }

    pub fn oov_id(token: &str) -> usize {
        OOV_BASE + (fnv1a64(token.as_bytes()) % OOV_BUCKETS as u64) as usize
    }

    pub fn is_oov_id(id: usize) -> bool {
        (OOV_BASE..FIRST_WORD_ID).contains(&id)
    }
}

/// A packed `[start] question [sep] passage [pad]…` input of fixed length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInput {
    pub token_ids: Vec<usize>,
    pub separator_position: usize,
    pub passage_offset: usize,
    /// Passage tokens that survived truncation.
    pub passage_len: usize,
    /// `true` for real (non-padding) positions.
    pub attention_mask: Vec<bool>,
    /// `true` where an answer may start or end: the passage positions.
    pub answer_mask: Vec<bool>,
    /// Gold span in packed coordinates.
    pub gold: (usize, usize),
}

impl EncodedInput {
    pub fn max_len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn active_len(&self) -> usize {
        self.passage_offset + self.passage_len
    }
}

/// Packs and indexes a sample, truncating to `max_len`.
pub fn tokenize_and_index(sample: &Sample, vocab: &Vocabulary, max_len: usize) -> Result<EncodedInput> {
    sample.validate(None)?;
    let separator_position = 1 + sample.question_tokens.len();
    let passage_offset = separator_position + 1;
    if passage_offset + sample.gold_end >= max_len {
        return Err(Error::SpanOutOfWindow(sample.key()));
    }
    let passage_len = sample.passage_tokens.len().min(max_len - passage_offset);
    let mut token_ids = Vec::with_capacity(max_len);
    token_ids.push(START_ID);
    token_ids.extend(sample.question_tokens.iter().map(|t| vocab.id(t)));
    token_ids.push(SEP_ID);
    token_ids.extend(sample.passage_tokens[..passage_len].iter().map(|t| vocab.id(t)));
    let active = token_ids.len();
    token_ids.resize(max_len, PAD_ID);
    let attention_mask = (0..max_len).map(|i| i < active).collect();
    let answer_mask = (0..max_len).map(|i| i >= passage_offset && i < active).collect();
    Ok(EncodedInput {
        token_ids,
        separator_position,
        passage_offset,
        passage_len,
        attention_mask,
        answer_mask,
        gold: (passage_offset + sample.gold_start, passage_offset + sample.gold_end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(q: &[&str], p: &[&str], span: (usize, usize)) -> Sample {
        Sample {
            id: "s".into(),
            question_tokens: q.iter().map(|t| t.to_string()).collect(),
            passage_tokens: p.iter().map(|t| t.to_string()).collect(),
            gold_start: span.0,
            gold_end: span.1,
            passage_lang: "en".into(),
            question_lang: "en".into(),
        }
    }

    #[test]
    fn packs_start_question_separator_passage() {
        let s = sample(&["q1"], &["a", "b"], (0, 1));
        let vocab = Vocabulary::from_samples([&s]);
        let enc = tokenize_and_index(&s, &vocab, 8).unwrap();
        let (a, b, q1) = (vocab.id("a"), vocab.id("b"), vocab.id("q1"));
        assert_eq!(enc.token_ids, vec![START_ID, q1, SEP_ID, a, b, PAD_ID, PAD_ID, PAD_ID]);
        assert_eq!(enc.passage_offset, 3);
        assert_eq!(enc.separator_position, 2);
        assert_eq!(enc.gold, (3, 4));
        assert_eq!(enc.attention_mask, vec![true, true, true, true, true, false, false, false]);
        assert_eq!(enc.answer_mask, vec![false, false, false, true, true, false, false, false]);
    }

    #[test]
    fn oov_tokens_hash_to_reserved_buckets() {
        let vocab = Vocabulary::from_samples(std::iter::empty());
        let id = vocab.id("never-seen");
        assert!(Vocabulary::is_oov_id(id));
        assert_eq!(id, vocab.id("never-seen"));
        assert_eq!(vocab.size(), 103);
    }

    #[test]
    fn truncated_gold_span_is_rejected() {
        let s = sample(&["q1", "q2"], &["a", "b", "c", "d", "e"], (3, 4));
        let vocab = Vocabulary::from_samples([&s]);
        assert!(matches!(tokenize_and_index(&s, &vocab, 7), Err(Error::SpanOutOfWindow(_))));
        let enc = tokenize_and_index(&s, &vocab, 9).unwrap();
        assert_eq!(enc.passage_len, 5);
        // passage tail beyond the window is cut, gold still inside
        let s2 = sample(&["q1"], &["a", "b", "c", "d", "e"], (0, 1));
        let enc = tokenize_and_index(&s2, &vocab, 5).unwrap();
        assert_eq!(enc.passage_len, 2);
        assert!(enc.attention_mask.iter().all(|&m| m));
    }
}
