use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{mark_answer, recover_answer, AlignedRecord, Rendering, CLOSE_MARKER, OPEN_MARKER};
use crate::error::{Error, Result};
use crate::hashing::fnv1a64;

/// Corruption applied to every non-source rendering, standing in for translation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub token_drop_prob: f64,
    pub token_swap_prob: f64,
    pub marker_destroy_prob: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        NoiseSpec { token_drop_prob: 0.0, token_swap_prob: 0.0, marker_destroy_prob: 0.0, seed }
    }

    fn check(&self) -> Result<()> {
        for (name, p) in [
            ("token_drop_prob", self.token_drop_prob),
            ("token_swap_prob", self.token_swap_prob),
            ("marker_destroy_prob", self.marker_destroy_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name}={p} is not a probability")));
            }
        }
        Ok(())
    }
}

/// Shape of the synthetic marker task.
///
/// A passage is filler text holding a few entity phrases. Entity tokens carry
/// a category and a role within their phrase (`s` single, `f` first, `m`
/// middle, `l` last), written `e{category}{role}{variant}`. Questions are a
/// few question words followed by a cue `c{category}`; the answer is the one
/// phrase of that category, which the passage introduces with the same cue.
/// Distractor phrases use other categories. Filler and question words are
/// translated per language; cues and entities are shared across languages
/// the way names and numbers survive translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub passage_len_min: usize,
    pub passage_len_max: usize,
    pub answer_len_min: usize,
    pub answer_len_max: usize,
    pub question_words: usize,
    pub filler_vocab: usize,
    pub question_vocab: usize,
    /// Number of entity categories, one cue token each.
    pub cue_vocab: usize,
    /// Distinct tokens per (category, role) pair.
    pub entity_variants: usize,
    /// Phrases of other categories placed in the passage.
    pub distractor_phrases: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            passage_len_min: 16,
            passage_len_max: 40,
            answer_len_min: 1,
            answer_len_max: 3,
            question_words: 3,
            filler_vocab: 200,
            question_vocab: 12,
            cue_vocab: 4,
            entity_variants: 1,
            distractor_phrases: 2,
        }
    }
}

impl TaskSpec {
    fn check(&self) -> Result<()> {
        let phrase_tokens = 1 + self.answer_len_max * (1 + self.distractor_phrases);
        let ok = self.answer_len_min >= 1
            && self.answer_len_min <= self.answer_len_max
            && self.passage_len_min <= self.passage_len_max
            && self.passage_len_min >= phrase_tokens + self.distractor_phrases
            && self.filler_vocab > 0
            && self.question_vocab > 0
            && self.cue_vocab > self.distractor_phrases.min(1)
            && self.entity_variants > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("inconsistent task spec {self:?}")))
        }
    }
}

fn filler(i: usize) -> String {
    format!("w{i}")
}

fn question_word(i: usize) -> String {
    format!("q{i}")
}

/// Per-language bijection on the filler and question vocabularies.
struct Lexicon {
    filler: Vec<String>,
    question: Vec<String>,
}

impl Lexicon {
    fn new(lang: &str, task: &TaskSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(lang.as_bytes()));
        let mut perm = |n: usize, prefix: char| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.into_iter().map(|j| format!("{lang}_{prefix}{j}")).collect::<Vec<_>>()
        };
        let filler = perm(task.filler_vocab, 'w');
        let question = perm(task.question_vocab, 'q');
        Lexicon { filler, question }
    }

    fn translate(&self, token: &str) -> String {
        let lookup = |table: &[String], rest: &str| rest.parse::<usize>().ok().and_then(|i| table.get(i).cloned());
        let translated = match token.split_at_checked(1) {
            Some(("w", rest)) => lookup(&self.filler, rest),
            Some(("q", rest)) => lookup(&self.question, rest),
            _ => None,
        };
        translated.unwrap_or_else(|| token.to_string())
    }
}

/// Translates one source token into `lang`. Cue and entity tokens pass through.
pub fn translate_token(token: &str, lang: &str, task: &TaskSpec) -> String {
    Lexicon::new(lang, task).translate(token)
}

fn corrupt_tokens(tokens: Vec<String>, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> Vec<String> {
    let is_marker = |t: &str| t == OPEN_MARKER || t == CLOSE_MARKER;
    let mut kept: Vec<String> = tokens
        .into_iter()
        .filter(|t| is_marker(t) || !rng.random_bool(noise.token_drop_prob))
        .collect();
    let mut i = 0;
    while i + 1 < kept.len() {
        if !is_marker(&kept[i]) && !is_marker(&kept[i + 1]) && rng.random_bool(noise.token_swap_prob) {
            kept.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
    kept
}

fn destroy_markers(mut marked: Vec<String>, rng: &mut ChaCha8Rng) -> Vec<String> {
    let open = marked.iter().position(|t| t == OPEN_MARKER);
    let close = marked.iter().position(|t| t == CLOSE_MARKER);
    let (Some(open), Some(close)) = (open, close) else { return marked };
    match rng.random_range(0..4) {
        0 => {
            marked.remove(open);
        }
        1 => {
            marked.remove(close);
        }
        2 => marked.insert(open, OPEN_MARKER.to_string()),
        _ => marked.swap(open, close),
    }
    marked
}

/// Generates `n_records` aligned records. The first language is the source;
/// the rest are translated and corrupted according to `noise`.
pub fn generate_synthetic_corpus(
    n_records: usize,
    languages: &[String],
    noise: &NoiseSpec,
    task: &TaskSpec,
) -> Result<Vec<AlignedRecord>> {
    if n_records == 0 {
        return Err(Error::InvalidConfig("n_records must be at least 1".into()));
    }
    let Some(source) = languages.first() else {
        return Err(Error::InvalidConfig("at least one language is required".into()));
    };
    noise.check()?;
    task.check()?;
    let lexicons: Vec<(String, Lexicon)> =
        languages[1..].iter().map(|l| (l.clone(), Lexicon::new(l, task))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let width = n_records.to_string().len().max(6);
    let mut records = Vec::with_capacity(n_records);
    for index in 0..n_records {
        let source_rendering = source_rendering(task, &mut rng);
        let mut renderings = BTreeMap::new();
        let marked = mark_answer(&source_rendering)?;
        for (lang, lexicon) in &lexicons {
            let translated: Vec<String> = marked.iter().map(|t| lexicon.translate(t)).collect();
            let question: Vec<String> =
                source_rendering.question_tokens.iter().map(|t| lexicon.translate(t)).collect();
            let mut passage = corrupt_tokens(translated, noise, &mut rng);
            let question = corrupt_tokens(question, noise, &mut rng);
            if rng.random_bool(noise.marker_destroy_prob) {
                passage = destroy_markers(passage, &mut rng);
            }
            let rendering = match recover_answer(&passage) {
                Ok((passage_tokens, span)) => {
                    Rendering { passage_tokens, question_tokens: question, answer_span: Some(span) }
                }
                Err(_) => Rendering { passage_tokens: passage, question_tokens: question, answer_span: None },
            };
            renderings.insert(lang.clone(), rendering);
        }
        renderings.insert(source.clone(), source_rendering);
        records.push(AlignedRecord {
            id: format!("r{index:0width$}"),
            source_language: source.clone(),
            renderings,
        });
    }
    Ok(records)
}

fn entity_phrase(category: usize, len: usize, task: &TaskSpec, rng: &mut ChaCha8Rng) -> Vec<String> {
    let role = |i: usize| match (len, i) {
        (1, _) => 's',
        (_, 0) => 'f',
        _ if i + 1 == len => 'l',
        _ => 'm',
    };
    (0..len).map(|i| format!("e{category}{}{}", role(i), rng.random_range(0..task.entity_variants))).collect()
}

fn source_rendering(task: &TaskSpec, rng: &mut ChaCha8Rng) -> Rendering {
    let category = rng.random_range(0..task.cue_vocab);
    let cue = format!("c{category}");
    let answer_len = rng.random_range(task.answer_len_min..=task.answer_len_max);
    // the cue-introduced answer first, then distractor phrases of other categories
    let mut units: Vec<Vec<String>> = vec![std::iter::once(cue.clone()).chain(entity_phrase(category, answer_len, task, rng)).collect()];
    for _ in 0..task.distractor_phrases {
        let other = (category + rng.random_range(1..task.cue_vocab)) % task.cue_vocab;
        let len = rng.random_range(task.answer_len_min..=task.answer_len_max);
        units.push(entity_phrase(other, len, task, rng));
    }
    let unit_tokens: usize = units.iter().map(Vec::len).sum();
    let len = rng.random_range(task.passage_len_min..=task.passage_len_max);
    let n_filler = len - unit_tokens;
    // distinct insertion slots among the filler keep phrases from touching
    let mut slots: Vec<usize> = (0..=n_filler).collect();
    slots.shuffle(rng);
    let mut placed: Vec<(usize, usize)> = slots.into_iter().take(units.len()).zip(0..units.len()).collect();
    placed.sort_unstable();
    let mut passage = Vec::with_capacity(len);
    let mut answer_span = (0, 0);
    let mut next = placed.iter().peekable();
    for slot in 0..=n_filler {
        while let Some(&&(_, unit)) = next.peek().filter(|(s, _)| *s == slot) {
            if unit == 0 {
                answer_span = (passage.len() + 1, passage.len() + answer_len);
            }
            passage.extend(units[unit].iter().cloned());
            next.next();
        }
        if slot < n_filler {
            passage.push(filler(rng.random_range(0..task.filler_vocab)));
        }
    }
    let mut question: Vec<String> =
        (0..task.question_words).map(|_| question_word(rng.random_range(0..task.question_vocab))).collect();
    question.push(cue);
    Rendering { passage_tokens: passage, question_tokens: question, answer_span: Some(answer_span) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_language_branches, BranchOptions};

    fn langs(s: &[&str]) -> Vec<String> {
        s.iter().map(|l| l.to_string()).collect()
    }

    #[test]
    fn noiseless_corpus_is_fully_recoverable() {
        let records =
            generate_synthetic_corpus(40, &langs(&["en", "es", "de"]), &NoiseSpec::noiseless(3), &TaskSpec::default())
                .unwrap();
        for r in &records {
            r.validate().unwrap();
            assert_eq!(r.renderings.len(), 3);
            let src = &r.renderings["en"];
            for rendering in r.renderings.values() {
                assert_eq!(rendering.answer_span, src.answer_span);
                assert_eq!(rendering.passage_tokens.len(), src.passage_tokens.len());
                let (s, e) = rendering.answer_span.unwrap();
                // answers are shared entities, identical across languages
                assert_eq!(rendering.passage_tokens[s..=e], src.passage_tokens[s..=e]);
                assert!(rendering.passage_tokens[s..=e].iter().all(|t| t.starts_with('e')));
            }
            let cues = src.passage_tokens.iter().filter(|t| t.starts_with('c')).count();
            assert_eq!(cues, 1);
        }
        let set = build_language_branches(&records, &BranchOptions::new(langs(&["en", "es", "de"]))).unwrap();
        assert!(set.branches.iter().all(|b| b.len() == 120));
    }

    #[test]
    fn translation_is_a_bijection_that_spares_shared_tokens() {
        let task = TaskSpec::default();
        let lexicon = Lexicon::new("es", &task);
        let mut seen = std::collections::HashSet::new();
        for i in 0..task.filler_vocab {
            assert!(seen.insert(lexicon.translate(&filler(i))));
        }
        assert_eq!(lexicon.translate("e7"), "e7");
        assert_eq!(lexicon.translate("c3"), "c3");
        assert_eq!(lexicon.translate(OPEN_MARKER), OPEN_MARKER);
        assert_eq!(translate_token("w5", "es", &task), lexicon.translate("w5"));
    }

    #[test]
    fn same_seed_same_corpus() {
        let noise = NoiseSpec { token_drop_prob: 0.1, token_swap_prob: 0.1, marker_destroy_prob: 0.1, seed: 11 };
        let l = langs(&["en", "de"]);
        let a = generate_synthetic_corpus(30, &l, &noise, &TaskSpec::default()).unwrap();
        let b = generate_synthetic_corpus(30, &l, &noise, &TaskSpec::default()).unwrap();
        assert_eq!(crate::corpus::to_jsonl_bytes(&a).unwrap(), crate::corpus::to_jsonl_bytes(&b).unwrap());
    }

    #[test]
    fn marker_destruction_rate_is_binomial() {
        let noise = NoiseSpec { marker_destroy_prob: 0.2, ..NoiseSpec::noiseless(5) };
        let records =
            generate_synthetic_corpus(1000, &langs(&["en", "es"]), &noise, &TaskSpec::default()).unwrap();
        let lost = records.iter().filter(|r| r.renderings["es"].answer_span.is_none()).count();
        assert!((160..=240).contains(&lost), "{lost}");
    }

    #[test]
    fn zero_records_rejected() {
        assert!(matches!(
            generate_synthetic_corpus(0, &langs(&["en"]), &NoiseSpec::noiseless(0), &TaskSpec::default()),
            Err(Error::InvalidConfig(_))
        ));
        let bad = NoiseSpec { token_drop_prob: 1.5, ..NoiseSpec::noiseless(0) };
        assert!(generate_synthetic_corpus(1, &langs(&["en"]), &bad, &TaskSpec::default()).is_err());
    }
}
