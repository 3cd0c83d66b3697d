use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::eval::{exact_match, f1_score, predict, SpanPredictor, DEFAULT_MAX_ANSWER_LENGTH};
use crate::numerics::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub max_answer_length: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { max_answer_length: DEFAULT_MAX_ANSWER_LENGTH }
    }
}

/// Scores for one (passage language, question language) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub passage_lang: String,
    pub question_lang: String,
    pub em: f64,
    pub f1: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    /// Micro averages over every scored sample.
    pub em: f64,
    pub f1: f64,
    pub n: usize,
    /// Unweighted means over the grid cells.
    pub macro_em: f64,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Cells sorted by passage language, then question language.
    pub grid: Vec<CellMetrics>,
    pub overall: OverallMetrics,
    /// Samples whose answer did not fit the input window.
    pub skips: usize,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}

/// Scores every sample and aggregates per language pair. Aggregation sorts
/// by sample key, so the result does not depend on dataset order.
pub fn evaluate<P: SpanPredictor + ?Sized>(predictor: &P, dataset: &[Sample], config: &EvalConfig) -> Result<EvalReport> {
    let mut scored: Vec<(String, String, String, f64, f64)> = Vec::with_capacity(dataset.len());
    let mut skips = 0;
    for sample in dataset {
        match predict(predictor, sample, config.max_answer_length) {
            Ok(p) => {
                let gold = sample.gold_tokens();
                scored.push((
                    sample.passage_lang.clone(),
                    sample.question_lang.clone(),
                    p.sample_id,
                    exact_match(&p.answer_tokens[..], gold),
                    f1_score(&p.answer_tokens[..], gold),
                ));
            }
            Err(Error::SpanOutOfWindow(_)) => skips += 1,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)));
    let mut cells: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (p, q, _, em, f1) in &scored {
        let cell = cells.entry((p.clone(), q.clone())).or_default();
        cell.0.push(*em);
        cell.1.push(*f1);
    }
    let grid: Vec<CellMetrics> = cells
        .into_iter()
        .map(|((passage_lang, question_lang), (ems, f1s))| CellMetrics {
            passage_lang,
            question_lang,
            em: mean(&ems),
            f1: mean(&f1s),
            n: ems.len(),
        })
        .collect();
    let all_em: Vec<f64> = scored.iter().map(|s| s.3).collect();
    let all_f1: Vec<f64> = scored.iter().map(|s| s.4).collect();
    let overall = OverallMetrics {
        em: mean(&all_em),
        f1: mean(&all_f1),
        n: scored.len(),
        macro_em: mean(&grid.iter().map(|c| c.em).collect::<Vec<_>>()),
        macro_f1: mean(&grid.iter().map(|c| c.f1).collect::<Vec<_>>()),
    };
    Ok(EvalReport { grid, overall, skips })
}

impl EvalReport {
    pub fn cell(&self, passage_lang: &str, question_lang: &str) -> Option<&CellMetrics> {
        self.grid.iter().find(|c| c.passage_lang == passage_lang && c.question_lang == question_lang)
    }

    /// Passage languages (rows) and question languages (columns), sorted.
    pub fn languages(&self) -> (Vec<String>, Vec<String>) {
        let mut rows: Vec<String> = self.grid.iter().map(|c| c.passage_lang.clone()).collect();
        let mut cols: Vec<String> = self.grid.iter().map(|c| c.question_lang.clone()).collect();
        rows.dedup();
        cols.sort();
        cols.dedup();
        (rows, cols)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Fixed-width grid of "EM / F1" cells in percent, passage languages as
    /// rows and question languages as columns.
    pub fn render_text(&self) -> String {
        let (rows, cols) = self.languages();
        let mut out = format!("{:<8}", "p \\ q");
        for c in &cols {
            let _ = write!(out, "{c:>15}");
        }
        out.push('\n');
        for r in &rows {
            let _ = write!(out, "{r:<8}");
            for c in &cols {
                match self.cell(r, c) {
                    Some(m) => {
                        let _ = write!(out, "{:>15}", format!("{:.1} / {:.1}", 100.0 * m.em, 100.0 * m.f1));
                    }
                    None => {
                        let _ = write!(out, "{:>15}", "-");
                    }
                }
            }
            out.push('\n');
        }
        let o = &self.overall;
        let _ = writeln!(
            out,
            "overall {:.1} / {:.1} (n={}, macro EM {:.1}, skipped {})",
            100.0 * o.em,
            100.0 * o.f1,
            o.n,
            100.0 * o.macro_em,
            self.skips
        );
        out
    }
}
