use std::collections::BTreeMap;

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::eval::decode_span;
use crate::model::{tokenize_and_index, EncodedInput, ModelBundle, Vocabulary, MASKED_LOGIT};
use crate::scalar::Real;

/// Anything that produces start/end logits for a sample.
pub trait SpanPredictor {
    /// The packed input and its start/end logits. Samples whose answer falls
    /// outside the window fail with `SpanOutOfWindow`.
    fn logits(&self, sample: &Sample) -> Result<(EncodedInput, Vec<f64>, Vec<f64>)>;
}

impl<T: Real> SpanPredictor for ModelBundle<T> {
    fn logits(&self, sample: &Sample) -> Result<(EncodedInput, Vec<f64>, Vec<f64>)> {
        let input = tokenize_and_index(sample, &self.vocab, self.model.config.max_len)?;
        let out = self.model.infer(&input)?;
        let widen = |v: Vec<T>| v.into_iter().map(Real::as_f64).collect();
        Ok((input, widen(out.start_logits), widen(out.end_logits)))
    }
}

fn packed(sample: &Sample, max_len: usize) -> Result<EncodedInput> {
    tokenize_and_index(sample, &Vocabulary::from(Vec::new()), max_len)
}

fn masked(input: &EncodedInput, value: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..input.max_len()).map(|i| if input.answer_mask[i] { value(i) } else { MASKED_LOGIT }).collect()
}

/// Knows the gold span: its logits are one-hot at the gold positions.
#[derive(Clone, Copy, Debug)]
pub struct OraclePredictor {
    pub max_len: usize,
}

impl SpanPredictor for OraclePredictor {
    fn logits(&self, sample: &Sample) -> Result<(EncodedInput, Vec<f64>, Vec<f64>)> {
        let input = packed(sample, self.max_len)?;
        let (gs, ge) = input.gold;
        let zs = masked(&input, |i| if i == gs { 1.0 } else { 0.0 });
        let ze = masked(&input, |i| if i == ge { 1.0 } else { 0.0 });
        Ok((input, zs, ze))
    }
}

/// Equal logits on every passage position; decoding then follows tie-breaking.
#[derive(Clone, Copy, Debug)]
pub struct UniformPredictor {
    pub max_len: usize,
}

impl SpanPredictor for UniformPredictor {
    fn logits(&self, sample: &Sample) -> Result<(EncodedInput, Vec<f64>, Vec<f64>)> {
        let input = packed(sample, self.max_len)?;
        let z = masked(&input, |_| 0.0);
        Ok((input, z.clone(), z))
    }
}

/// Sends each sample to the predictor registered for its passage language,
/// the way translate-train keeps one model per language.
pub struct PassageLanguageRouter<P> {
    pub routes: BTreeMap<String, P>,
}

impl<P: SpanPredictor> SpanPredictor for PassageLanguageRouter<P> {
    fn logits(&self, sample: &Sample) -> Result<(EncodedInput, Vec<f64>, Vec<f64>)> {
        self.routes
            .get(&sample.passage_lang)
            .ok_or_else(|| Error::InvalidConfig(format!("no model for passage language {}", sample.passage_lang)))?
            .logits(sample)
    }
}

/// A decoded answer.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub sample_id: String,
    /// Inclusive span in passage coordinates.
    pub span: (usize, usize),
    pub answer_tokens: Vec<String>,
    /// `z_s[start] + z_e[end]`.
    pub score: f64,
}

/// Decodes the best span of `sample` under `predictor`.
pub fn predict<P: SpanPredictor + ?Sized>(predictor: &P, sample: &Sample, max_answer_length: usize) -> Result<Prediction> {
    let (input, zs, ze) = predictor.logits(sample)?;
    let (s, e) = decode_span(&zs, &ze, &input.answer_mask, max_answer_length)?;
    let offset = input.passage_offset;
    Ok(Prediction {
        sample_id: sample.key(),
        span: (s - offset, e - offset),
        answer_tokens: sample.passage_tokens[s - offset..=e - offset].to_vec(),
        score: zs[s] + ze[e],
    })
}
