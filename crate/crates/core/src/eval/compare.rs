use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub passage_lang: String,
    pub question_lang: String,
    pub em: f64,
    pub f1: f64,
    pub delta_em: f64,
    pub delta_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub cells: Vec<ComparisonCell>,
    pub macro_em: f64,
    pub macro_f1: f64,
    pub delta_macro_em: f64,
    pub delta_macro_f1: f64,
}

/// Runs side by side over one language grid, with deltas against a baseline row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// Aligns `reports` on their shared grid; deltas are taken against
/// `reports[baseline]`.
pub fn compare_runs(reports: &[(String, EvalReport)], baseline: usize) -> Result<Comparison> {
    let (base_label, base) =
        reports.get(baseline).ok_or_else(|| Error::InvalidConfig(format!("baseline row {baseline} does not exist")))?;
    let key = |r: &EvalReport| r.grid.iter().map(|c| (c.passage_lang.clone(), c.question_lang.clone())).collect::<Vec<_>>();
    let grid = key(base);
    let mut rows = Vec::with_capacity(reports.len());
    for (label, report) in reports {
        if key(report) != grid {
            return Err(Error::InvalidConfig(format!("run {label} is scored on a different language grid")));
        }
        let cells = report
            .grid
            .iter()
            .zip(&base.grid)
            .map(|(c, b)| ComparisonCell {
                passage_lang: c.passage_lang.clone(),
                question_lang: c.question_lang.clone(),
                em: c.em,
                f1: c.f1,
                delta_em: c.em - b.em,
                delta_f1: c.f1 - b.f1,
            })
            .collect();
        rows.push(ComparisonRow {
            label: label.clone(),
            cells,
            macro_em: report.overall.macro_em,
            macro_f1: report.overall.macro_f1,
            delta_macro_em: report.overall.macro_em - base.overall.macro_em,
            delta_macro_f1: report.overall.macro_f1 - base.overall.macro_f1,
        });
    }
    Ok(Comparison { baseline: base_label.clone(), rows })
}

impl Comparison {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One line per run; each cell reads "EM / F1 (ΔEM)" as fractions.
    pub fn render_text(&self) -> String {
        let label_width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(8);
        let cell = |em: f64, f1: f64, d: f64| format!("{em:.3} / {f1:.3} ({d:+.3})");
        let width = cell(0.0, 0.0, 0.0).len() + 2;
        let mut out = format!("{:<label_width$}", "run");
        if let Some(first) = self.rows.first() {
            for c in &first.cells {
                let _ = write!(out, "{:>width$}", format!("{}/{}", c.passage_lang, c.question_lang));
            }
        }
        let _ = writeln!(out, "{:>width$}", "macro");
        for row in &self.rows {
            let _ = write!(out, "{:<label_width$}", row.label);
            for c in &row.cells {
                let _ = write!(out, "{:>width$}", cell(c.em, c.f1, c.delta_em));
            }
            let _ = writeln!(out, "{:>width$}", cell(row.macro_em, row.macro_f1, row.delta_macro_em));
        }
        let _ = writeln!(out, "deltas are against {}", self.baseline);
        out
    }
}
