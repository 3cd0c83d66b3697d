//! Pipeline stages. Each reads its inputs from and writes its outputs to the
//! output directory layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lbmrc::corpus::{
    build_language_branches, build_mix_dataset, build_translate_train, generate_synthetic_corpus, read_records,
    read_samples, split_records, union_dataset, write_jsonl, AlignedRecord, BranchOptions, BuildStats, LanguageBranch,
    Sample,
};
use lbmrc::distill::LogitStore;
use lbmrc::eval::{compare_runs, evaluate, EvalConfig, EvalReport, PassageLanguageRouter, SpanPredictor};
use lbmrc::hashing::sha256_hex;
use lbmrc::ModelBundle64;
use lbmrc::train::{distill_student_with, dump_teacher_logits, train_teacher_with, RunManifest, TrainConfig, TrainOutcome};

use crate::error::{CliError, CliResult};
use crate::layout::{ensure_parent, require, Layout};
use crate::settings::Settings;

type Bundle = ModelBundle64;

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_samples(path: &Path, samples: &[Sample]) -> CliResult {
    ensure_parent(path)?;
    write_jsonl(path, samples)?;
    Ok(())
}

fn file_digest(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(require(path)?)?))
}

fn checked_languages(s: &Settings) -> CliResult<Vec<String>> {
    if s.languages.is_empty() {
        return Err(CliError::config("the language list is empty"));
    }
    Ok(s.languages.clone())
}

pub fn generate(s: &Settings, layout: &Layout) -> CliResult {
    let mut languages = checked_languages(s)?;
    if let Some(z) = &s.zero_shot_language {
        if languages.contains(z) {
            return Err(CliError::config(format!("zero-shot language {z} is also a training language")));
        }
        languages.push(z.clone());
    }
    let records = generate_synthetic_corpus(s.records, &languages, &s.noise(), &s.task())?;
    let path = layout.corpus();
    ensure_parent(&path)?;
    write_jsonl(&path, &records)?;
    let digest = file_digest(&path)?;
    fs::write(layout.corpus_digest(), format!("{digest}  corpus.jsonl\n"))?;
    println!("wrote {} records in {} languages to {} (sha256 {digest})", records.len(), languages.len(), path.display());
    Ok(())
}

fn read_split(layout: &Layout, part: &str) -> CliResult<Vec<AlignedRecord>> {
    Ok(read_records(require(&layout.split(part))?)?)
}

pub fn build(s: &Settings, layout: &Layout) -> CliResult {
    let languages = checked_languages(s)?;
    let records = read_records(require(&layout.corpus())?)?;
    let (train, eval) = split_records(&records, s.eval_fraction, s.seed)?;
    let (train_path, eval_path) = (layout.split("train"), layout.split("eval"));
    ensure_parent(&train_path)?;
    write_jsonl(&train_path, &train)?;
    write_jsonl(&eval_path, &eval)?;
    let stats: BuildStats = match s.mode.as_str() {
        "lbmrc" => {
            let options = BranchOptions { augment_with_source: s.augment, ..BranchOptions::new(languages) };
            let set = build_language_branches(&train, &options)?;
            for branch in &set.branches {
                write_samples(&layout.branch(&branch.passage_lang), &branch.samples)?;
                println!("branch {}: {} samples", branch.passage_lang, branch.len());
            }
            let union = union_dataset(&set.branches);
            write_samples(&layout.union(), &union)?;
            println!("union: {} samples", union.len());
            set.stats
        }
        "mixmrc" => {
            let built = build_mix_dataset(&train, &languages, s.seed)?;
            write_samples(&layout.mix(), &built.samples)?;
            println!("mix: {} samples", built.samples.len());
            built.stats
        }
        "translate-train" => {
            let targets = s.language.clone().map(|l| vec![l]).unwrap_or(languages);
            let mut stats = BuildStats::default();
            for lang in &targets {
                let built = build_translate_train(&train, lang)?;
                write_samples(&layout.translate_train(lang), &built.samples)?;
                println!("translate-train {lang}: {} samples", built.samples.len());
                stats.records_seen += built.stats.records_seen;
                stats.missing_rendering += built.stats.missing_rendering;
                stats.too_long += built.stats.too_long;
                stats.emitted += built.stats.emitted;
                stats.unrecoverable.extend(built.stats.unrecoverable);
            }
            stats
        }
        other => return Err(CliError::config(format!("unknown build mode {other:?} (expected lbmrc, mixmrc or translate-train)"))),
    };
    write_json(&layout.build_dir(&s.mode).join("stats.json"), &stats)?;
    println!(
        "skipped: {} unrecoverable renderings, {} records missing a language",
        stats.total_unrecoverable(),
        stats.missing_rendering
    );
    Ok(())
}

/// Trains (or, with `resume`, reuses) the run `label`, writing per-epoch
/// checkpoints, the final model and the manifest.
fn run_training(
    layout: &Layout,
    label: &str,
    config: &TrainConfig,
    digests: BTreeMap<String, String>,
    resume: bool,
    train: impl FnOnce(&mut dyn FnMut(usize, &Bundle) -> lbmrc::Result<()>) -> lbmrc::Result<TrainOutcome<f64>>,
) -> CliResult<Bundle> {
    let (dir, manifest_path, final_path) = (layout.run_dir(label), layout.manifest(label), layout.checkpoint(label));
    if resume && manifest_path.exists() {
        let previous = RunManifest::load(&manifest_path)?;
        previous.verify_resume(config, &digests)?;
        if final_path.exists() {
            println!("{label}: up to date");
            return Ok(Bundle::load(&final_path)?);
        }
    }
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let mut names = Vec::new();
    let mut hook = |epoch: usize, bundle: &Bundle| -> lbmrc::Result<()> {
        let name = format!("epoch-{epoch:02}.ckpt");
        bundle.save(&dir.join(&name))?;
        names.push(name);
        Ok(())
    };
    let outcome = train(&mut hook)?;
    let TrainOutcome { mut bundle, mut manifest } = outcome;
    bundle.meta.label = label.to_string();
    manifest.label = label.to_string();
    manifest.corpus_digests = digests;
    names.push("model.ckpt".into());
    manifest.checkpoints = names;
    bundle.save(&final_path)?;
    manifest.save(&manifest_path)?;
    if let (Some(first), Some(last)) = (manifest.loss_curve.first(), manifest.loss_curve.last()) {
        println!("{label}: loss {:.4} -> {:.4} over {} epochs", first.total, last.total, manifest.loss_curve.len());
    }
    Ok(bundle)
}

/// Training data and run label for a teacher of the configured mode.
fn teacher_source(s: &Settings, layout: &Layout) -> CliResult<(String, PathBuf)> {
    let need_language = || s.language.clone().ok_or_else(|| CliError::config(format!("mode {} needs --language", s.mode)));
    let (label, path) = match s.mode.as_str() {
        "lbmrc" => {
            let lang = need_language()?;
            (lang.clone(), layout.branch(&lang))
        }
        "mixmrc" => ("mix".to_string(), layout.mix()),
        "translate-train" => {
            let lang = need_language()?;
            (format!("tt-{lang}"), layout.translate_train(&lang))
        }
        other => return Err(CliError::config(format!("unknown mode {other:?}"))),
    };
    Ok((s.label.clone().unwrap_or(label), path))
}

pub fn train_teacher(s: &Settings, layout: &Layout) -> CliResult {
    let (label, path) = teacher_source(s, layout)?;
    train_teacher_from(s, layout, &label, &path, s.resume).map(|_| ())
}

fn train_teacher_from(s: &Settings, layout: &Layout, label: &str, path: &Path, resume: bool) -> CliResult<Bundle> {
    let config = s.train_config()?;
    let digests = BTreeMap::from([("train".to_string(), file_digest(path)?)]);
    let branch = LanguageBranch { passage_lang: label.to_string(), samples: read_samples(path)? };
    run_training(layout, label, &config, digests, resume, |hook| train_teacher_with(&branch, &config, hook))
}

fn teacher_labels(s: &Settings) -> CliResult<Vec<String>> {
    if s.teachers.is_empty() {
        checked_languages(s)
    } else {
        Ok(s.teachers.clone())
    }
}

pub fn dump_logits(s: &Settings, layout: &Layout) -> CliResult {
    let union_path = layout.union();
    let dataset = read_samples(require(&union_path)?)?;
    for teacher in teacher_labels(s)? {
        let bundle = Bundle::load(require(&layout.checkpoint(&teacher))?)?;
        dump_one(layout, &teacher, &bundle, &dataset)?;
    }
    Ok(())
}

fn dump_one(layout: &Layout, teacher: &str, bundle: &Bundle, dataset: &[Sample]) -> CliResult {
    let outcome = dump_teacher_logits(bundle, dataset)?;
    let path = layout.logits(teacher);
    ensure_parent(&path)?;
    let mut store = outcome.store;
    if store.teacher_id() != teacher {
        let mut renamed = LogitStore::new(teacher, store.max_len());
        for r in store.records() {
            renamed.insert(r.sample_id.clone(), r.start_logits.clone(), r.end_logits.clone())?;
        }
        store = renamed;
    }
    store.save(&path)?;
    println!("{teacher}: {} logit records, {} skipped", store.len(), outcome.skipped);
    Ok(())
}

fn load_stores(layout: &Layout, teachers: &[String]) -> CliResult<Vec<LogitStore<f64>>> {
    teachers.iter().map(|t| Ok(LogitStore::load(require(&layout.logits(t))?)?)).collect()
}

pub fn distill(s: &Settings, layout: &Layout) -> CliResult {
    let label = s.label.clone().unwrap_or_else(|| "student".into());
    distill_into(s, layout, &label, &teacher_labels(s)?, s.resume).map(|_| ())
}

fn distill_into(s: &Settings, layout: &Layout, label: &str, teachers: &[String], resume: bool) -> CliResult<Bundle> {
    let config = TrainConfig { teacher_set: teachers.to_vec(), ..s.train_config()? };
    let union_path = layout.union();
    let mut digests = BTreeMap::from([("train".to_string(), file_digest(&union_path)?)]);
    for t in teachers {
        digests.insert(format!("logits.{t}"), file_digest(&layout.logits(t))?);
    }
    let dataset = read_samples(&union_path)?;
    let stores = load_stores(layout, teachers)?;
    run_training(layout, label, &config, digests, resume, |hook| distill_student_with(&stores, &dataset, &config, hook))
}

fn model_path(layout: &Layout, spec: &str) -> PathBuf {
    if spec.ends_with(".ckpt") {
        PathBuf::from(spec)
    } else {
        layout.checkpoint(spec)
    }
}

/// The evaluation samples: the full language grid of the held-out records,
/// or the (z, z) cell of a zero-shot language.
fn eval_dataset(s: &Settings, layout: &Layout) -> CliResult<Vec<Sample>> {
    let eval = read_split(layout, "eval")?;
    if let Some(z) = &s.zero_shot_language {
        return Ok(build_translate_train(&eval, z)?.samples);
    }
    let options = BranchOptions::new(checked_languages(s)?);
    let set = build_language_branches(&eval, &options)?;
    Ok(set
        .branches
        .into_iter()
        .filter(|b| s.passage_languages.is_empty() || s.passage_languages.contains(&b.passage_lang))
        .flat_map(|b| b.samples)
        .collect())
}

/// One `--model` entry: `run`, `path.ckpt`, or `lang=run` for an explicit
/// passage-language route.
fn parse_model(layout: &Layout, spec: &str) -> CliResult<(Option<String>, Bundle)> {
    let (route, name) = match spec.split_once('=') {
        Some((lang, name)) => (Some(lang.to_string()), name),
        None => (None, spec),
    };
    Ok((route, Bundle::load(require(&model_path(layout, name))?)?))
}

fn predictor_for(models: Vec<(Option<String>, Bundle)>) -> CliResult<Box<dyn SpanPredictor>> {
    if models.len() == 1 && models[0].0.is_none() {
        return Ok(Box::new(models.into_iter().next().expect("one model").1));
    }
    let mut routes = BTreeMap::new();
    for (route, b) in models {
        let lang = match route {
            Some(lang) => lang,
            None => match &b.meta.passage_languages[..] {
                [only] => only.clone(),
                langs => {
                    return Err(CliError::config(format!(
                        "{} was trained on passages in {langs:?}; name its route as LANG={}",
                        b.meta.label, b.meta.label
                    )))
                }
            },
        };
        if routes.insert(lang.clone(), b).is_some() {
            return Err(CliError::config(format!("two models route passage language {lang}")));
        }
    }
    Ok(Box::new(PassageLanguageRouter { routes }))
}

fn evaluate_models(s: &Settings, layout: &Layout, models: &[String], label: &str) -> CliResult<EvalReport> {
    if models.is_empty() {
        return Err(CliError::config("evaluate needs --model"));
    }
    let bundles: Vec<(Option<String>, Bundle)> =
        models.iter().map(|m| parse_model(layout, m)).collect::<CliResult<_>>()?;
    if let Some(z) = &s.zero_shot_language {
        if let Some((_, b)) = bundles.iter().find(|(_, b)| b.meta.training_languages.contains(z)) {
            return Err(CliError::config(format!("{z} is not zero-shot for {}: it was seen in training", b.meta.label)));
        }
    }
    let dataset = eval_dataset(s, layout)?;
    let predictor = predictor_for(bundles)?;
    let report = evaluate(predictor.as_ref(), &dataset, &EvalConfig { max_answer_length: s.max_answer_length })?;
    let json = layout.report(label, "json");
    ensure_parent(&json)?;
    fs::write(&json, report.to_json()?)?;
    fs::write(layout.report(label, "txt"), report.render_text())?;
    Ok(report)
}

pub fn evaluate_cmd(s: &Settings, layout: &Layout) -> CliResult {
    let label = s.label.clone().unwrap_or_else(|| s.model.join("+").replace(['/', '\\', '='], "_"));
    let report = evaluate_models(s, layout, &s.model, &label)?;
    println!("{label}\n{}", report.render_text());
    Ok(())
}

fn report_path(layout: &Layout, spec: &str) -> PathBuf {
    if spec.ends_with(".json") {
        PathBuf::from(spec)
    } else {
        layout.report(spec, "json")
    }
}

fn compare_and_write(
    reports: Vec<(String, EvalReport)>,
    baseline: Option<&str>,
    json: &Path,
    text: &Path,
) -> CliResult<String> {
    let index = match baseline {
        Some(b) => reports
            .iter()
            .position(|(l, _)| l == b)
            .ok_or_else(|| CliError::config(format!("baseline {b} is not among the compared runs")))?,
        None => 0,
    };
    let table = compare_runs(&reports, index)?;
    ensure_parent(json)?;
    fs::write(json, table.to_json()?)?;
    let rendered = table.render_text();
    fs::write(text, &rendered)?;
    Ok(rendered)
}

pub fn compare(s: &Settings, layout: &Layout) -> CliResult {
    if s.reports.is_empty() {
        return Err(CliError::config("compare needs --reports"));
    }
    let reports = s
        .reports
        .iter()
        .map(|r| {
            let path = report_path(layout, r);
            let text = fs::read_to_string(require(&path)?)?;
            let report: EvalReport =
                serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let label = path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| r.clone());
            Ok((label, report))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let name = s.label.clone().unwrap_or_else(|| "comparison".into());
    let text = compare_and_write(reports, s.baseline.as_deref(), &layout.report(&name, "json"), &layout.report(&name, "txt"))?;
    print!("{text}");
    Ok(())
}

/// Teachers, the mixMRC teacher, and every distillation setting, evaluated on
/// one grid and compared against `ours-imp` unless another baseline is given.
pub fn ablate(s: &Settings, layout: &Layout) -> CliResult {
    let languages = checked_languages(s)?;
    let union = read_samples(require(&layout.union())?)?;
    require(&layout.mix())?;
    let mut teachers = languages.clone();
    teachers.push("mix".into());
    for t in &teachers {
        let path = if t == "mix" { layout.mix() } else { layout.branch(t) };
        let bundle = train_teacher_from(s, layout, t, &path, true)?;
        dump_one(layout, t, &bundle, &union)?;
    }
    let mut settings: Vec<(String, Vec<String>, &str)> = vec![
        ("ours-hyper".into(), languages.clone(), "fixed"),
        ("ours-imp".into(), languages.clone(), "impurity"),
    ];
    for l in &languages {
        settings.push((format!("wo-{l}"), languages.iter().filter(|x| *x != l).cloned().collect(), "impurity"));
    }
    settings.push((format!("w-{}", languages[0]), vec![languages[0].clone()], "impurity"));
    settings.push(("w-mix".into(), vec!["mix".into()], "impurity"));
    let mut rows = Vec::new();
    let eval_settings = Settings { zero_shot_language: None, passage_languages: Vec::new(), ..s.clone() };
    for t in &teachers {
        let report = evaluate_models(&eval_settings, layout, std::slice::from_ref(t), t)?;
        rows.push((t.clone(), report));
    }
    for (label, set, strategy) in &settings {
        if set.is_empty() {
            continue;
        }
        let run_settings = Settings { strategy: strategy.to_string(), ..s.clone() };
        distill_into(&run_settings, layout, label, set, true)?;
        let report = evaluate_models(&eval_settings, layout, std::slice::from_ref(label), label)?;
        rows.push((label.clone(), report));
    }
    let baseline = s.baseline.clone().unwrap_or_else(|| "ours-imp".into());
    let dir = layout.root.join("ablation");
    let text = compare_and_write(rows, Some(&baseline), &dir.join("comparison.json"), &dir.join("comparison.txt"))?;
    print!("{text}");
    Ok(())
}
