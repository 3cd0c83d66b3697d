//! Span decoding, exact-match/F1 scoring, per-language reports and run
//! comparison tables.

mod compare;
mod decode;
mod metrics;
mod predictor;
mod report;

pub use compare::{compare_runs, Comparison, ComparisonCell, ComparisonRow};
pub use decode::{decode_span, DEFAULT_MAX_ANSWER_LENGTH};
pub use metrics::{exact_match, f1_score};
pub use predictor::{predict, OraclePredictor, PassageLanguageRouter, Prediction, SpanPredictor, UniformPredictor};
pub use report::{evaluate, CellMetrics, EvalConfig, EvalReport, OverallMetrics};
