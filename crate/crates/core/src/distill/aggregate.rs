use serde::{Deserialize, Serialize};

use crate::distill::TeacherWeights;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Precomputed start/end logits of one teacher for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord<T> {
    pub sample_id: String,
    pub teacher_id: String,
    pub start_logits: Vec<T>,
    pub end_logits: Vec<T>,
}

/// `z = Σ_k w^k · z^k` for start and end. `records[k]` pairs with weight `k`.
pub fn aggregate_logits<T: Real>(
    records: &[&LogitRecord<T>],
    weights: &TeacherWeights<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    if records.len() != weights.teachers() {
        return Err(Error::IncompleteLogits(format!(
            "{} teacher records for {} weights",
            records.len(),
            weights.teachers()
        )));
    }
    let first = records.first().ok_or_else(|| Error::IncompleteLogits("no teacher records".into()))?;
    let len = first.start_logits.len();
    if records.iter().any(|r| r.start_logits.len() != len || r.end_logits.len() != len) {
        return Err(Error::shape("teacher logit lengths differ"));
    }
    if records.iter().any(|r| r.sample_id != first.sample_id) {
        return Err(Error::IncompleteLogits("records belong to different samples".into()));
    }
    let mut start = vec![T::zero(); len];
    let mut end = vec![T::zero(); len];
    for (k, r) in records.iter().enumerate() {
        let (ws, we) = (weights.start[k], weights.end[k]);
        for i in 0..len {
            start[i] = start[i] + ws * r.start_logits[i];
            end[i] = end[i] + we * r.end_logits[i];
        }
    }
    Ok((start, end))
}
