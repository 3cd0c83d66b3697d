use std::collections::HashMap;

/// 1 when the token sequences are identical.
pub fn exact_match<S: AsRef<str>>(prediction: &[S], gold: &[S]) -> f64 {
    let same = prediction.len() == gold.len() && prediction.iter().zip(gold).all(|(a, b)| a.as_ref() == b.as_ref());
    if same {
        1.0
    } else {
        0.0
    }
}

/// Token-multiset overlap F1. Two empty sequences score 1.
pub fn f1_score<S: AsRef<str>>(prediction: &[S], gold: &[S]) -> f64 {
    if prediction.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in prediction {
        if let Some(c) = counts.get_mut(t.as_ref()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / prediction.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}
