use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_MAX_ANSWER_LENGTH: usize = 30;

/// Highest-scoring span `(s, e)` with `s ≤ e < s + max_answer_length` over
/// valid positions, scored by `z_s[s] + z_e[e]`. Ties go to the smaller
/// start, then the smaller end.
pub fn decode_span<T: Real>(
    start_logits: &[T],
    end_logits: &[T],
    valid: &[bool],
    max_answer_length: usize,
) -> Result<(usize, usize)> {
    let n = start_logits.len();
    if end_logits.len() != n || valid.len() != n {
        return Err(Error::shape("decode inputs differ in length"));
    }
    let mut best: Option<(T, usize, usize)> = None;
    for s in (0..n).filter(|&s| valid[s]) {
        for e in s..n.min(s.saturating_add(max_answer_length)) {
            if !valid[e] {
                continue;
            }
            let score = start_logits[s] + end_logits[e];
            if best.is_none_or(|(b, _, _)| score > b) {
                best = Some((score, s, e));
            }
        }
    }
    best.map(|(_, s, e)| (s, e)).ok_or(Error::NoValidSpan)
}
