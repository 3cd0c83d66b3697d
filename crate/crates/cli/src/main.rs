//! `lbmrc`: the language-branch distillation pipeline.
//!
//! Settings come from built-in defaults, then an optional JSON config file
//! (`--config`), then command-line flags. Config keys and flags share names.

mod commands;
mod error;
mod layout;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliResult;
use crate::layout::Layout;
use crate::settings::{split_list, Settings};

#[derive(Parser)]
#[command(name = "lbmrc", version, about = "Language-branch machine reading comprehension with multi-teacher distillation")]
struct Cli {
    /// JSON config file with flat, dotted keys (for example "model.hidden")
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice of the command
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory of all artifacts
    #[arg(long = "out-dir", global = true, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Comma-separated language list; the first one is the source language
    #[arg(long, global = true, value_name = "LIST")]
    languages: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the aligned synthetic corpus and its digest
    Generate(CorpusArgs),
    /// Split the corpus and build training datasets for one mode
    Build(BuildArgs),
    /// Train one teacher model
    TrainTeacher {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Store teacher logits over the union of all branches
    DumpLogits {
        /// Comma-separated teacher labels (default: one per language)
        #[arg(long, value_name = "LIST")]
        teachers: Option<String>,
    },
    /// Train the student against stored teacher logits
    Distill {
        #[command(flatten)]
        distill: DistillArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score models on the held-out language grid
    Evaluate(EvalArgs),
    /// Train, distill and evaluate every teacher setting and compare them
    Ablate {
        #[command(flatten)]
        train: TrainArgs,
        /// Sign of the impurity weighting for distilled settings: 1 or -1
        #[arg(long = "impurity-sign", allow_hyphen_values = true)]
        impurity_sign: Option<i8>,
        /// Longest answer span considered when decoding
        #[arg(long = "max-answer-length")]
        max_answer_length: Option<usize>,
        /// Row the deltas are computed against (default: ours-imp)
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Tabulate evaluation reports with deltas against a baseline
    Compare {
        /// Comma-separated report labels or paths to report JSON files
        #[arg(long, value_name = "LIST")]
        reports: Option<String>,
        /// Label of the baseline report (default: the first one)
        #[arg(long)]
        baseline: Option<String>,
        /// Name of the comparison files under reports/
        #[arg(long)]
        label: Option<String>,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// Number of aligned records
    #[arg(long)]
    records: Option<usize>,
    /// Extra language generated for zero-shot evaluation only
    #[arg(long = "zero-shot-language")]
    zero_shot_language: Option<String>,
    /// Per-token drop probability in non-source renderings
    #[arg(long = "noise.token-drop")]
    noise_token_drop: Option<f64>,
    /// Per-token adjacent-swap probability in non-source renderings
    #[arg(long = "noise.token-swap")]
    noise_token_swap: Option<f64>,
    /// Probability that a non-source rendering loses its answer markers
    #[arg(long = "noise.marker-destroy")]
    noise_marker_destroy: Option<f64>,
    /// Shortest generated passage, in tokens
    #[arg(long = "task.passage-len-min")]
    task_passage_len_min: Option<usize>,
    /// Longest generated passage, in tokens
    #[arg(long = "task.passage-len-max")]
    task_passage_len_max: Option<usize>,
    /// Shortest answer phrase, in tokens
    #[arg(long = "task.answer-len-min")]
    task_answer_len_min: Option<usize>,
    /// Longest answer phrase, in tokens
    #[arg(long = "task.answer-len-max")]
    task_answer_len_max: Option<usize>,
    /// Question words before the category cue
    #[arg(long = "task.question-words")]
    task_question_words: Option<usize>,
    /// Distinct filler words per language
    #[arg(long = "task.filler-vocab")]
    task_filler_vocab: Option<usize>,
    /// Distinct question words per language
    #[arg(long = "task.question-vocab")]
    task_question_vocab: Option<usize>,
    /// Number of answer categories
    #[arg(long = "task.categories")]
    task_categories: Option<usize>,
    /// Entity variants per category and role
    #[arg(long = "task.entity-variants")]
    task_entity_variants: Option<usize>,
    /// Phrases of other categories placed in each passage
    #[arg(long = "task.distractor-phrases")]
    task_distractor_phrases: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    /// lbmrc, mixmrc or translate-train
    #[arg(long)]
    mode: Option<String>,
    /// Target language of translate-train (default: every language)
    #[arg(long)]
    language: Option<String>,
    /// Fraction of records held out for evaluation
    #[arg(long = "eval-fraction")]
    eval_fraction: Option<f64>,
    /// Add source-language samples to every other branch (true or false)
    #[arg(long, value_name = "BOOL")]
    augment: Option<bool>,
}

#[derive(Args)]
struct SourceArgs {
    /// lbmrc, mixmrc or translate-train
    #[arg(long)]
    mode: Option<String>,
    /// Branch language (lbmrc) or target language (translate-train)
    #[arg(long)]
    language: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Passes over the training data
    #[arg(long)]
    epochs: Option<usize>,
    /// Samples per optimizer step
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// AdamW learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// AdamW decoupled weight decay
    #[arg(long = "weight-decay")]
    weight_decay: Option<f64>,
    /// Global gradient-norm clip; 0 disables clipping
    #[arg(long = "clip-norm")]
    clip_norm: Option<f64>,
    /// Distillation temperature
    #[arg(long)]
    tau: Option<f64>,
    /// Weight of the likelihood loss
    #[arg(long)]
    lambda1: Option<f64>,
    /// Weight of the distillation loss
    #[arg(long)]
    lambda2: Option<f64>,
    /// Standard deviation of the normal weight initialisation
    #[arg(long = "init-std")]
    init_std: Option<f64>,
    /// Encoder width
    #[arg(long = "model.hidden")]
    model_hidden: Option<usize>,
    /// Feed-forward inner width
    #[arg(long = "model.ff")]
    model_ff: Option<usize>,
    /// Packed input length
    #[arg(long = "model.max-len")]
    model_max_len: Option<usize>,
    /// Encoder layers
    #[arg(long = "model.layers")]
    model_layers: Option<usize>,
    /// Run label (directory under runs/)
    #[arg(long)]
    label: Option<String>,
    /// Reuse a finished run whose config and inputs are unchanged
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct DistillArgs {
    /// Comma-separated teacher labels (default: one per language)
    #[arg(long, value_name = "LIST")]
    teachers: Option<String>,
    /// fixed or impurity
    #[arg(long)]
    strategy: Option<String>,
    /// Sign of the impurity weighting: 1 favours uncertain teachers, -1 confident ones
    #[arg(long = "impurity-sign", allow_hyphen_values = true)]
    impurity_sign: Option<i8>,
}

#[derive(Args)]
struct EvalArgs {
    /// Comma-separated run labels or checkpoint paths. Several models are
    /// routed by passage language, inferred from the checkpoint or given as
    /// LANG=RUN
    #[arg(long, value_name = "LIST")]
    model: Option<String>,
    /// Comma-separated passage languages to score (default: all)
    #[arg(long = "passage-languages", value_name = "LIST")]
    passage_languages: Option<String>,
    /// Score only this language, which no model may have seen in training
    #[arg(long = "zero-shot-language")]
    zero_shot_language: Option<String>,
    /// Longest answer span considered when decoding
    #[arg(long = "max-answer-length")]
    max_answer_length: Option<usize>,
    /// Report name under reports/
    #[arg(long)]
    label: Option<String>,
}

macro_rules! set {
    ($settings:ident, $args:ident: $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field { $settings.$field = v; })*
    };
}

impl CorpusArgs {
    fn apply(self, s: &mut Settings) {
        let a = self;
        set!(s, a: records, noise_token_drop, noise_token_swap, noise_marker_destroy, task_passage_len_min,
            task_passage_len_max, task_answer_len_min, task_answer_len_max, task_question_words, task_filler_vocab,
            task_question_vocab, task_categories, task_entity_variants, task_distractor_phrases);
        if a.zero_shot_language.is_some() {
            s.zero_shot_language = a.zero_shot_language;
        }
    }
}

impl BuildArgs {
    fn apply(self, s: &mut Settings) {
        let a = self;
        set!(s, a: mode, eval_fraction, augment);
        if a.language.is_some() {
            s.language = a.language;
        }
    }
}

impl SourceArgs {
    fn apply(self, s: &mut Settings) {
        let a = self;
        set!(s, a: mode);
        if a.language.is_some() {
            s.language = a.language;
        }
    }
}

impl TrainArgs {
    fn apply(self, s: &mut Settings) {
        let a = self;
        set!(s, a: epochs, batch_size, lr, weight_decay, clip_norm, tau, lambda1, lambda2, init_std, model_hidden,
            model_ff, model_max_len, model_layers);
        if a.label.is_some() {
            s.label = a.label;
        }
        s.resume |= a.resume;
    }
}

impl DistillArgs {
    fn apply(self, s: &mut Settings) {
        let a = self;
        set!(s, a: strategy, impurity_sign);
        if let Some(t) = a.teachers {
            s.teachers = split_list(&t);
        }
    }
}

impl EvalArgs {
    fn apply(self, s: &mut Settings) {
        let a = self;
        set!(s, a: max_answer_length);
        if let Some(m) = a.model {
            s.model = split_list(&m);
        }
        if let Some(p) = a.passage_languages {
            s.passage_languages = split_list(&p);
        }
        if a.zero_shot_language.is_some() {
            s.zero_shot_language = a.zero_shot_language;
        }
        if a.label.is_some() {
            s.label = a.label;
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let mut s = Settings::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(l) = cli.languages {
        s.languages = split_list(&l);
    }
    let layout = Layout::new(cli.out_dir);
    match cli.command {
        Command::Generate(a) => {
            a.apply(&mut s);
            commands::generate(&s, &layout)
        }
        Command::Build(a) => {
            a.apply(&mut s);
            commands::build(&s, &layout)
        }
        Command::TrainTeacher { source, train } => {
            source.apply(&mut s);
            train.apply(&mut s);
            commands::train_teacher(&s, &layout)
        }
        Command::DumpLogits { teachers } => {
            if let Some(t) = teachers {
                s.teachers = split_list(&t);
            }
            commands::dump_logits(&s, &layout)
        }
        Command::Distill { distill, train } => {
            distill.apply(&mut s);
            train.apply(&mut s);
            commands::distill(&s, &layout)
        }
        Command::Evaluate(a) => {
            a.apply(&mut s);
            commands::evaluate_cmd(&s, &layout)
        }
        Command::Ablate { train, impurity_sign, max_answer_length, baseline } => {
            train.apply(&mut s);
            if let Some(v) = impurity_sign {
                s.impurity_sign = v;
            }
            if let Some(v) = max_answer_length {
                s.max_answer_length = v;
            }
            if baseline.is_some() {
                s.baseline = baseline;
            }
            commands::ablate(&s, &layout)
        }
        Command::Compare { reports, baseline, label } => {
            if let Some(r) = reports {
                s.reports = split_list(&r);
            }
            if baseline.is_some() {
                s.baseline = baseline;
            }
            if label.is_some() {
                s.label = label;
            }
            commands::compare(&s, &layout)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
