use lbmrc::corpus::{build_language_branches, generate_synthetic_corpus, split_records, union_dataset, BranchOptions, NoiseSpec, TaskSpec};
use lbmrc::distill::{ImpuritySign, SelectiveStrategy};
use lbmrc::eval::{evaluate, EvalConfig};
use lbmrc::train::{distill_student, dump_teacher_logits, train_teacher, TrainConfig};

fn main() -> lbmrc::Result<()> {
    let langs: Vec<String> = vec!["en".into(), "es".into(), "de".into()];
    let corpus = generate_synthetic_corpus(200, &langs, &NoiseSpec::noiseless(0), &TaskSpec::default())?;
    let (train, eval) = split_records(&corpus, 0.2, 0)?;
    let options = BranchOptions::new(langs.clone());
    let train_set = build_language_branches(&train, &options)?;
    let eval_set = build_language_branches(&eval, &options)?;

    let config = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let union = union_dataset(&train_set.branches);
    let mut stores = Vec::new();
    for branch in &train_set.branches {
        let teacher = train_teacher::<f64>(branch, &config)?;
        stores.push(dump_teacher_logits(&teacher.bundle, &union)?.store);
    }

    let student_config = TrainConfig {
        selective_strategy: SelectiveStrategy::Impurity { sign: ImpuritySign::Positive },
        ..config
    };
    let student = distill_student(&stores, &union, &student_config)?;
    let report = evaluate(&student.bundle, &union_dataset(&eval_set.branches), &EvalConfig::default())?;
    println!("{}", report.render_text());
    Ok(())
}
