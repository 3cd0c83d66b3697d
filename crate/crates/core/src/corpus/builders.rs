use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{recover_answer, AlignedRecord, LanguageBranch, Rendering, Sample};
use crate::error::{Error, Result};

/// Options shared by the dataset builders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchOptions {
    pub languages: Vec<String>,
    /// Add every source-language sample to each non-source branch.
    pub augment_with_source: bool,
    /// Samples longer than this once packed are skipped.
    pub max_input_len: Option<usize>,
}

impl BranchOptions {
    pub fn new(languages: Vec<String>) -> Self {
        BranchOptions { languages, augment_with_source: false, max_input_len: None }
    }

    fn check(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::InvalidConfig("language list is empty".into()));
        }
        let distinct: BTreeSet<_> = self.languages.iter().collect();
        if distinct.len() != self.languages.len() {
            return Err(Error::InvalidConfig("language list has duplicates".into()));
        }
        Ok(())
    }
}

/// Skip accounting emitted alongside every built dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub records_seen: usize,
    /// Records lacking a rendering for some requested language.
    pub missing_rendering: usize,
    /// Per passage language, renderings whose answer span could not be recovered.
    pub unrecoverable: BTreeMap<String, usize>,
    pub too_long: usize,
    pub emitted: usize,
}

impl BuildStats {
    pub fn total_unrecoverable(&self) -> usize {
        self.unrecoverable.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltDataset {
    pub samples: Vec<Sample>,
    pub stats: BuildStats,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSet {
    /// In the order of the requested languages.
    pub branches: Vec<LanguageBranch>,
    pub stats: BuildStats,
}

impl BranchSet {
    pub fn get(&self, lang: &str) -> Option<&LanguageBranch> {
        self.branches.iter().find(|b| b.passage_lang == lang)
    }
}

/// Usable passage of a rendering: the stored span, or the span recovered from markers.
fn resolve(rendering: &Rendering) -> Result<(Vec<String>, (usize, usize))> {
    match rendering.answer_span {
        Some(span) => {
            rendering.validate()?;
            Ok((rendering.passage_tokens.clone(), span))
        }
        None => recover_answer(&rendering.passage_tokens),
    }
}

struct Resolved<'a> {
    record: &'a AlignedRecord,
    /// `None` where the answer was unrecoverable.
    passages: BTreeMap<&'a str, Option<(Vec<String>, (usize, usize))>>,
}

fn resolve_records<'a>(
    records: &'a [AlignedRecord],
    languages: &'a [String],
    stats: &mut BuildStats,
) -> Vec<Resolved<'a>> {
    let mut out = Vec::new();
    for record in records {
        stats.records_seen += 1;
        if languages.iter().any(|l| !record.renderings.contains_key(l)) {
            stats.missing_rendering += 1;
            continue;
        }
        let mut passages = BTreeMap::new();
        for lang in languages {
            let resolved = resolve(&record.renderings[lang]).ok();
            if resolved.is_none() {
                *stats.unrecoverable.entry(lang.clone()).or_default() += 1;
            }
            passages.insert(lang.as_str(), resolved);
        }
        out.push(Resolved { record, passages });
    }
    out
}

fn make_sample(
    resolved: &Resolved<'_>,
    passage_lang: &str,
    question_lang: &str,
    max_len: Option<usize>,
    stats: &mut BuildStats,
) -> Option<Sample> {
    let (passage, (start, end)) = resolved.passages.get(passage_lang)?.as_ref()?;
    let sample = Sample {
        id: resolved.record.id.clone(),
        question_tokens: resolved.record.renderings[question_lang].question_tokens.clone(),
        passage_tokens: passage.clone(),
        gold_start: *start,
        gold_end: *end,
        passage_lang: passage_lang.to_string(),
        question_lang: question_lang.to_string(),
    };
    if max_len.is_some_and(|l| sample.packed_len() > l) {
        stats.too_long += 1;
        return None;
    }
    Some(sample)
}

/// Groups samples by passage language; each branch pairs its passages with
/// the questions of every configured language.
pub fn build_language_branches(records: &[AlignedRecord], options: &BranchOptions) -> Result<BranchSet> {
    options.check()?;
    let mut stats = BuildStats::default();
    let resolved = resolve_records(records, &options.languages, &mut stats);
    let mut own: Vec<Vec<Sample>> = vec![Vec::new(); options.languages.len()];
    let mut source_samples: Vec<Sample> = Vec::new();
    for r in &resolved {
        for (k, p_lang) in options.languages.iter().enumerate() {
            for q_lang in &options.languages {
                if let Some(s) = make_sample(r, p_lang, q_lang, options.max_input_len, &mut stats) {
                    if *p_lang == r.record.source_language {
                        source_samples.push(s.clone());
                    }
                    own[k].push(s);
                }
            }
        }
    }
    let branches: Vec<LanguageBranch> = options
        .languages
        .iter()
        .zip(own)
        .map(|(lang, mut samples)| {
            if options.augment_with_source {
                samples.extend(source_samples.iter().filter(|s| &s.passage_lang != lang).cloned());
            }
            LanguageBranch { passage_lang: lang.clone(), samples }
        })
        .collect();
    stats.emitted = branches.iter().map(LanguageBranch::len).sum();
    Ok(BranchSet { branches, stats })
}

/// Every (passage language, question language) pairing in one shuffled set.
pub fn build_mix_dataset(records: &[AlignedRecord], languages: &[String], seed: u64) -> Result<BuiltDataset> {
    build_mix_dataset_with(records, &BranchOptions::new(languages.to_vec()), seed)
}

pub(crate) fn build_mix_dataset_with(
    records: &[AlignedRecord],
    options: &BranchOptions,
    seed: u64,
) -> Result<BuiltDataset> {
    options.check()?;
    let mut stats = BuildStats::default();
    let resolved = resolve_records(records, &options.languages, &mut stats);
    let mut samples = Vec::new();
    for r in &resolved {
        for p_lang in &options.languages {
            for q_lang in &options.languages {
                samples.extend(make_sample(r, p_lang, q_lang, options.max_input_len, &mut stats));
            }
        }
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    stats.emitted = samples.len();
    Ok(BuiltDataset { samples, stats })
}

/// Monolingual dataset: passage and question both in `language`.
pub fn build_translate_train(records: &[AlignedRecord], language: &str) -> Result<BuiltDataset> {
    build_translate_train_with(records, language, None)
}

pub fn build_translate_train_with(
    records: &[AlignedRecord],
    language: &str,
    max_input_len: Option<usize>,
) -> Result<BuiltDataset> {
    if language.is_empty() {
        return Err(Error::InvalidConfig("empty language code".into()));
    }
    let languages = [language.to_string()];
    let mut stats = BuildStats::default();
    let resolved = resolve_records(records, &languages, &mut stats);
    let samples: Vec<Sample> = resolved
        .iter()
        .filter_map(|r| make_sample(r, language, language, max_input_len, &mut stats))
        .collect();
    stats.emitted = samples.len();
    Ok(BuiltDataset { samples, stats })
}

/// Union of branches, dropping repeated `(id, passage_lang, question_lang)` triples.
pub fn union_dataset<'a>(branches: impl IntoIterator<Item = &'a LanguageBranch>) -> Vec<Sample> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for branch in branches {
        for s in &branch.samples {
            if seen.insert(s.key()) {
                out.push(s.clone());
            }
        }
    }
    out
}

/// Deterministic record-level split into `(train, eval)`, preserving input order.
pub fn split_records(
    records: &[AlignedRecord],
    eval_fraction: f64,
    seed: u64,
) -> Result<(Vec<AlignedRecord>, Vec<AlignedRecord>)> {
    if !(0.0..1.0).contains(&eval_fraction) {
        return Err(Error::InvalidConfig(format!("eval fraction {eval_fraction} outside [0, 1)")));
    }
    let n_eval = (records.len() as f64 * eval_fraction).round() as usize;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let eval_set: HashSet<usize> = order.into_iter().take(n_eval).collect();
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if eval_set.contains(&i) {
            eval.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((train, eval))
}
