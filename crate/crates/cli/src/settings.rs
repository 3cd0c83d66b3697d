//! Flat, dotted-key pipeline configuration.

use std::fs;
use std::path::Path;

use lbmrc::corpus::{NoiseSpec, TaskSpec};
use lbmrc::distill::{ImpuritySign, SelectiveStrategy};
use lbmrc::model::ModelConfig;
use lbmrc::train::{AdamWConfig, TrainConfig};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

/// Every pipeline setting. Config files use these names as flat JSON keys;
/// each key is also a command-line flag of the same name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub seed: u64,
    pub records: usize,
    #[serde(deserialize_with = "list")]
    pub languages: Vec<String>,
    pub zero_shot_language: Option<String>,
    #[serde(rename = "noise.token-drop")]
    pub noise_token_drop: f64,
    #[serde(rename = "noise.token-swap")]
    pub noise_token_swap: f64,
    #[serde(rename = "noise.marker-destroy")]
    pub noise_marker_destroy: f64,
    #[serde(rename = "task.passage-len-min")]
    pub task_passage_len_min: usize,
    #[serde(rename = "task.passage-len-max")]
    pub task_passage_len_max: usize,
    #[serde(rename = "task.answer-len-min")]
    pub task_answer_len_min: usize,
    #[serde(rename = "task.answer-len-max")]
    pub task_answer_len_max: usize,
    #[serde(rename = "task.question-words")]
    pub task_question_words: usize,
    #[serde(rename = "task.filler-vocab")]
    pub task_filler_vocab: usize,
    #[serde(rename = "task.question-vocab")]
    pub task_question_vocab: usize,
    #[serde(rename = "task.categories")]
    pub task_categories: usize,
    #[serde(rename = "task.entity-variants")]
    pub task_entity_variants: usize,
    #[serde(rename = "task.distractor-phrases")]
    pub task_distractor_phrases: usize,
    pub eval_fraction: f64,
    pub mode: String,
    pub language: Option<String>,
    pub augment: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Global-norm gradient clip; 0 disables clipping.
    pub clip_norm: f64,
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub init_std: f64,
    #[serde(rename = "model.hidden")]
    pub model_hidden: usize,
    #[serde(rename = "model.ff")]
    pub model_ff: usize,
    #[serde(rename = "model.max-len")]
    pub model_max_len: usize,
    #[serde(rename = "model.layers")]
    pub model_layers: usize,
    #[serde(deserialize_with = "list")]
    pub teachers: Vec<String>,
    pub strategy: String,
    pub impurity_sign: i8,
    pub label: Option<String>,
    #[serde(deserialize_with = "list")]
    pub model: Vec<String>,
    #[serde(deserialize_with = "list")]
    pub passage_languages: Vec<String>,
    pub max_answer_length: usize,
    pub resume: bool,
    #[serde(deserialize_with = "list")]
    pub reports: Vec<String>,
    pub baseline: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        let task = TaskSpec::default();
        let train = TrainConfig::default();
        Settings {
            seed: 7,
            records: 500,
            languages: vec!["en".into(), "es".into(), "de".into()],
            zero_shot_language: None,
            noise_token_drop: 0.0,
            noise_token_swap: 0.0,
            noise_marker_destroy: 0.0,
            task_passage_len_min: task.passage_len_min,
            task_passage_len_max: task.passage_len_max,
            task_answer_len_min: task.answer_len_min,
            task_answer_len_max: task.answer_len_max,
            task_question_words: task.question_words,
            task_filler_vocab: task.filler_vocab,
            task_question_vocab: task.question_vocab,
            task_categories: task.cue_vocab,
            task_entity_variants: task.entity_variants,
            task_distractor_phrases: task.distractor_phrases,
            eval_fraction: 0.2,
            mode: "lbmrc".into(),
            language: None,
            augment: true,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.optimizer.learning_rate,
            weight_decay: train.optimizer.weight_decay,
            clip_norm: train.clip_norm.unwrap_or(0.0),
            tau: train.tau,
            lambda1: train.lambda1,
            lambda2: train.lambda2,
            init_std: train.init_std,
            model_hidden: train.model.hidden,
            model_ff: train.model.ff,
            model_max_len: train.model.max_len,
            model_layers: train.model.layers,
            teachers: Vec::new(),
            strategy: "impurity".into(),
            impurity_sign: 1,
            label: None,
            model: Vec::new(),
            passage_languages: Vec::new(),
            max_answer_length: lbmrc::eval::DEFAULT_MAX_ANSWER_LENGTH,
            resume: false,
            reports: Vec::new(),
            baseline: None,
        }
    }
}

/// Accepts either a JSON array of strings or one comma-separated string.
fn list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(String),
        Many(Vec<String>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::One(s) => split_list(&s),
        Raw::Many(v) => v,
    })
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Settings::default()) };
        if !path.exists() {
            return Err(CliError::missing(path));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            token_drop_prob: self.noise_token_drop,
            token_swap_prob: self.noise_token_swap,
            marker_destroy_prob: self.noise_marker_destroy,
            seed: self.seed,
        }
    }

    pub fn task(&self) -> TaskSpec {
        TaskSpec {
            passage_len_min: self.task_passage_len_min,
            passage_len_max: self.task_passage_len_max,
            answer_len_min: self.task_answer_len_min,
            answer_len_max: self.task_answer_len_max,
            question_words: self.task_question_words,
            filler_vocab: self.task_filler_vocab,
            question_vocab: self.task_question_vocab,
            cue_vocab: self.task_categories,
            entity_variants: self.task_entity_variants,
            distractor_phrases: self.task_distractor_phrases,
        }
    }

    pub fn strategy(&self) -> Result<SelectiveStrategy, CliError> {
        match self.strategy.as_str() {
            "fixed" => Ok(SelectiveStrategy::Fixed),
            "impurity" => {
                let sign = ImpuritySign::try_from(self.impurity_sign).map_err(CliError::config)?;
                Ok(SelectiveStrategy::Impurity { sign })
            }
            other => Err(CliError::config(format!("unknown strategy {other:?} (expected fixed or impurity)"))),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            tau: self.tau,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            selective_strategy: self.strategy()?,
            teacher_set: self.teachers.clone(),
            model: ModelConfig {
                vocab_size: 0,
                hidden: self.model_hidden,
                ff: self.model_ff,
                max_len: self.model_max_len,
                layers: self.model_layers,
            },
            optimizer: AdamWConfig { learning_rate: self.lr, weight_decay: self.weight_decay, ..AdamWConfig::default() },
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            init_std: self.init_std,
        };
        config.validate()?;
        Ok(config)
    }
}
