use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{to_jsonl_bytes, LanguageBranch, Sample};
use crate::distill::{
    aggregate_logits, fixed_weights, impurity_teacher_weights, LogitRecord, LogitStore, Objective, SelectiveStrategy,
};
use crate::error::{Error, Result};
use crate::hashing::sha256_hex;
use crate::model::{tokenize_and_index, BundleMeta, EncodedInput, ModelBundle, SpanModel, Vocabulary};
use crate::numerics::pairwise_sum;
use crate::scalar::Real;
use crate::train::{optimizer_step, EpochLoss, OptimizerState, RunManifest, TrainConfig, SKIP_SPAN_OUT_OF_WINDOW};

/// A trained model and the manifest describing how it was produced.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub bundle: ModelBundle<T>,
    pub manifest: RunManifest,
}

/// A teacher's logit store plus the samples that did not fit the window.
#[derive(Clone, Debug)]
pub struct DumpOutcome<T> {
    pub store: LogitStore<T>,
    pub skipped: usize,
}

type Targets<T> = Vec<(Vec<T>, Vec<T>)>;

fn training_languages(samples: &[Sample]) -> Vec<String> {
    let langs: BTreeSet<&String> = samples.iter().flat_map(|s| [&s.passage_lang, &s.question_lang]).collect();
    langs.into_iter().cloned().collect()
}

fn passage_languages(samples: &[Sample]) -> Vec<String> {
    let langs: BTreeSet<&String> = samples.iter().map(|s| &s.passage_lang).collect();
    langs.into_iter().cloned().collect()
}

fn dataset_digest(samples: &[Sample]) -> Result<String> {
    Ok(sha256_hex(&to_jsonl_bytes(samples)?))
}

fn init_bundle<T: Real>(samples: &[Sample], config: &TrainConfig, label: &str) -> Result<ModelBundle<T>> {
    let vocab = Vocabulary::from_samples(samples);
    let model_config = config.model.with_vocab_size(vocab.size());
    let model = SpanModel::init_with_std(model_config, config.seed, config.init_std)?;
    let meta = BundleMeta {
        label: label.to_string(),
        seed: config.seed,
        training_languages: training_languages(samples),
        passage_languages: passage_languages(samples),
    };
    Ok(ModelBundle { model, vocab, meta })
}

/// Encodes every sample, returning the indices and inputs that fit the window.
fn encode_all(samples: &[Sample], vocab: &Vocabulary, max_len: usize) -> Result<(Vec<(usize, EncodedInput)>, usize)> {
    let mut out = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for (i, s) in samples.iter().enumerate() {
        match tokenize_and_index(s, vocab, max_len) {
            Ok(input) => out.push((i, input)),
            Err(Error::SpanOutOfWindow(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

fn mean<T: Real>(xs: &[T]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (pairwise_sum(xs) / T::from_count(xs.len())).as_f64()
}

/// Shared mini-batch loop: one seeded shuffle per epoch, batch-mean
/// gradients accumulated in batch order, optional global-norm clipping, AdamW.
fn fit<T: Real>(
    bundle: &mut ModelBundle<T>,
    inputs: &[EncodedInput],
    targets: Option<&Targets<T>>,
    objective: &Objective,
    config: &TrainConfig,
    manifest: &mut RunManifest,
    on_epoch: &mut dyn FnMut(usize, &ModelBundle<T>) -> Result<()>,
) -> Result<()> {
    let mut state = OptimizerState::new(config.optimizer, &bundle.model.params)?;
    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng);
        let (mut totals, mut nlls, mut kds) = (Vec::new(), Vec::new(), Vec::new());
        let model = &mut bundle.model;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                let pass = model.forward(&inputs[i])?;
                let teacher = targets.map(|t| (&t[i].0[..], &t[i].1[..]));
                let (loss, gs, ge) =
                    objective.evaluate(&pass.output.start_logits, &pass.output.end_logits, inputs[i].gold, teacher)?;
                model.backward(&pass, &gs, &ge, &mut grads)?;
                totals.push(loss.total);
                nlls.push(loss.nll);
                kds.push(loss.kd);
            }
            grads.scale(T::one() / T::from_count(batch.len()));
            if let Some(clip) = config.clip_norm {
                let norm = grads.global_norm();
                let clip = T::lit(clip);
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            optimizer_step(&mut model.params, &grads, &mut state)?;
        }
        manifest.loss_curve.push(EpochLoss { epoch, total: mean(&totals), nll: mean(&nlls), kd: mean(&kds) });
        on_epoch(epoch, bundle)?;
    }
    Ok(())
}

fn no_hook<T>(_: usize, _: &ModelBundle<T>) -> Result<()> {
    Ok(())
}

/// Trains one branch teacher on hard labels (likelihood at τ = 1).
pub fn train_teacher<T: Real>(branch: &LanguageBranch, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_teacher_with(branch, config, &mut no_hook)
}

/// [`train_teacher`] with a callback invoked after every epoch.
pub fn train_teacher_with<T: Real>(
    branch: &LanguageBranch,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &ModelBundle<T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if branch.samples.is_empty() {
        return Err(Error::InvalidConfig(format!("branch {} has no samples", branch.passage_lang)));
    }
    let digests = BTreeMap::from([("train".to_string(), dataset_digest(&branch.samples)?)]);
    let mut manifest = RunManifest::new(branch.passage_lang.clone(), config, digests);
    let mut bundle = init_bundle(&branch.samples, config, &branch.passage_lang)?;
    let (encoded, skipped) = encode_all(&branch.samples, &bundle.vocab, config.model.max_len)?;
    manifest.skips.insert(SKIP_SPAN_OUT_OF_WINDOW.into(), skipped);
    if encoded.is_empty() {
        return Err(Error::InvalidConfig(format!("no sample of branch {} fits the input window", branch.passage_lang)));
    }
    let inputs: Vec<EncodedInput> = encoded.into_iter().map(|(_, x)| x).collect();
    fit(&mut bundle, &inputs, None, &Objective::nll_only(), config, &mut manifest, on_epoch)?;
    Ok(TrainOutcome { bundle, manifest })
}

/// Runs the teacher over `dataset` and records its raw start/end logits.
pub fn dump_teacher_logits<T: Real>(teacher: &ModelBundle<T>, dataset: &[Sample]) -> Result<DumpOutcome<T>> {
    let max_len = teacher.model.config.max_len;
    let (encoded, skipped) = encode_all(dataset, &teacher.vocab, max_len)?;
    let mut store = LogitStore::new(teacher.meta.label.clone(), max_len);
    for (i, input) in encoded {
        let out = teacher.model.infer(&input)?;
        store.insert(dataset[i].key(), out.start_logits, out.end_logits)?;
    }
    Ok(DumpOutcome { store, skipped })
}

fn select_stores<'a, T: Real>(stores: &'a [LogitStore<T>], config: &TrainConfig) -> Result<Vec<&'a LogitStore<T>>> {
    let selected: Vec<&LogitStore<T>> = if config.teacher_set.is_empty() {
        stores.iter().collect()
    } else {
        config
            .teacher_set
            .iter()
            .map(|id| {
                stores
                    .iter()
                    .find(|s| s.teacher_id() == id)
                    .ok_or_else(|| Error::IncompleteLogits(format!("no logit store for teacher {id}")))
            })
            .collect::<Result<_>>()?
    };
    if selected.is_empty() {
        return Err(Error::InvalidConfig("at least one teacher is required".into()));
    }
    if let Some(bad) = selected.iter().find(|s| s.max_len() != config.model.max_len) {
        return Err(Error::shape(format!(
            "teacher {} stores length {} but the student uses {}",
            bad.teacher_id(),
            bad.max_len(),
            config.model.max_len
        )));
    }
    Ok(selected)
}

/// Aggregated teacher logits for each sample under the selective strategy.
pub fn distillation_targets<T: Real>(
    stores: &[&LogitStore<T>],
    samples: &[&Sample],
    strategy: SelectiveStrategy,
) -> Result<Targets<T>> {
    let fixed = fixed_weights::<T>(stores.len())?;
    samples
        .iter()
        .map(|sample| {
            let key = sample.key();
            let records: Vec<&LogitRecord<T>> = stores
                .iter()
                .map(|s| {
                    s.get(&key)
                        .ok_or_else(|| Error::IncompleteLogits(format!("teacher {} has no logits for {key}", s.teacher_id())))
                })
                .collect::<Result<_>>()?;
            let weights = match strategy {
                SelectiveStrategy::Fixed => fixed.clone(),
                SelectiveStrategy::Impurity { sign } => {
                    let starts: Vec<&[T]> = records.iter().map(|r| &r.start_logits[..]).collect();
                    let ends: Vec<&[T]> = records.iter().map(|r| &r.end_logits[..]).collect();
                    impurity_teacher_weights(&starts, &ends, sign)?
                }
            };
            aggregate_logits(&records, &weights)
        })
        .collect()
}

/// Distills a student from precomputed teacher logits on `dataset`.
pub fn distill_student<T: Real>(
    stores: &[LogitStore<T>],
    dataset: &[Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    distill_student_with(stores, dataset, config, &mut no_hook)
}

/// [`distill_student`] with a callback invoked after every epoch.
pub fn distill_student_with<T: Real>(
    stores: &[LogitStore<T>],
    dataset: &[Sample],
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &ModelBundle<T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty distillation dataset".into()));
    }
    let selected = select_stores(stores, config)?;
    let mut digests = BTreeMap::from([("train".to_string(), dataset_digest(dataset)?)]);
    for s in &selected {
        digests.insert(format!("logits.{}", s.teacher_id()), sha256_hex(&s.to_bytes()?));
    }
    let mut manifest = RunManifest::new("student", config, digests);
    let mut bundle = init_bundle(dataset, config, "student")?;
    let (encoded, skipped) = encode_all(dataset, &bundle.vocab, config.model.max_len)?;
    manifest.skips.insert(SKIP_SPAN_OUT_OF_WINDOW.into(), skipped);
    if encoded.is_empty() {
        return Err(Error::InvalidConfig("no distillation sample fits the input window".into()));
    }
    let kept: Vec<&Sample> = encoded.iter().map(|(i, _)| &dataset[*i]).collect();
    let targets = distillation_targets(&selected, &kept, config.selective_strategy)?;
    let inputs: Vec<EncodedInput> = encoded.into_iter().map(|(_, x)| x).collect();
    fit(&mut bundle, &inputs, Some(&targets), &config.objective(), config, &mut manifest, on_epoch)?;
    Ok(TrainOutcome { bundle, manifest })
}

/// Mean hard-label loss of `bundle` over the samples that fit its window.
pub fn dataset_loss<T: Real>(bundle: &ModelBundle<T>, samples: &[Sample]) -> Result<T> {
    let (encoded, _) = encode_all(samples, &bundle.vocab, bundle.model.config.max_len)?;
    if encoded.is_empty() {
        return Err(Error::InvalidParameter("no sample fits the input window".into()));
    }
    let objective = Objective::nll_only();
    let losses = encoded
        .iter()
        .map(|(_, input)| {
            let out = bundle.model.infer(input)?;
            Ok(objective.evaluate(&out.start_logits, &out.end_logits, input.gold, None)?.0.total)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(pairwise_sum(&losses) / T::from_count(losses.len()))
}
