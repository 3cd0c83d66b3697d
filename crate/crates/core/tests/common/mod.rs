//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use lbmrc::distill::Objective;
use lbmrc::model::{EncodedInput, ModelConfig, SpanModel, MASKED_LOGIT, PAD_ID, SEP_ID, START_ID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_VOCAB: usize = 30;
pub const GRAD_LEN: usize = 16;

/// A random model (V=30, h=8, L=16), a packed input with three question
/// tokens and nine passage tokens, and masked teacher logits.
pub fn gradient_setup(seed: u64, layers: usize) -> (SpanModel<f64>, EncodedInput, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig { vocab_size: GRAD_VOCAB, hidden: 8, ff: 12, max_len: GRAD_LEN, layers };
    let model = SpanModel::init_with_std(config, seed, 0.5).unwrap();
    let (question, passage) = (3, 9);
    let offset = 2 + question;
    let mut token_ids = vec![PAD_ID; GRAD_LEN];
    token_ids[0] = START_ID;
    token_ids[1 + question] = SEP_ID;
    for i in (1..=question).chain(offset..offset + passage) {
        token_ids[i] = rng.random_range(3..GRAD_VOCAB);
    }
    let real = offset + passage;
    let input = EncodedInput {
        token_ids,
        separator_position: 1 + question,
        passage_offset: offset,
        passage_len: passage,
        attention_mask: (0..GRAD_LEN).map(|i| i < real).collect(),
        answer_mask: (0..GRAD_LEN).map(|i| (offset..real).contains(&i)).collect(),
        gold: (offset + 2, offset + 4),
    };
    let mut teacher = || -> Vec<f64> {
        (0..GRAD_LEN)
            .map(|i| if input.answer_mask[i] { rng.random_range(-2.0..2.0) } else { MASKED_LOGIT })
            .collect()
    };
    let (ts, te) = (teacher(), teacher());
    (model, input, ts, te)
}

fn loss(model: &SpanModel<f64>, input: &EncodedInput, obj: &Objective, t: Option<(&[f64], &[f64])>) -> f64 {
    let out = model.infer(input).unwrap();
    obj.evaluate(&out.start_logits, &out.end_logits, input.gold, t).unwrap().0.total
}

/// Largest relative disagreement between the analytic gradient and central
/// differences with step `1e-5`, over every parameter. Entries where both
/// sides are below `1e-7` are compared absolutely.
pub fn max_gradient_error(obj: Objective, with_teacher: bool, seed: u64, layers: usize) -> (f64, String) {
    let (model, input, ts, te) = gradient_setup(seed, layers);
    let t = with_teacher.then(|| (&ts[..], &te[..]));
    let pass = model.forward(&input).unwrap();
    let (_, gs, ge) = obj.evaluate(&pass.output.start_logits, &pass.output.end_logits, input.gold, t).unwrap();
    let mut grads = model.zero_grads();
    model.backward(&pass, &gs, &ge, &mut grads).unwrap();
    let analytic = grads.flatten();
    let names: Vec<(String, usize)> = grads.named_blocks().iter().map(|(n, b)| (n.clone(), b.len())).collect();
    let h = 1e-5;
    let (mut worst, mut worst_at) = (0.0f64, String::new());
    let mut flat = 0;
    for (block, (name, len)) in names.iter().enumerate() {
        for j in 0..*len {
            let perturbed = |delta: f64| {
                let mut m = model.clone();
                m.params.blocks_mut()[block][j] += delta;
                loss(&m, &input, &obj, t)
            };
            let numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h);
            let a = analytic[flat];
            flat += 1;
            let scale = a.abs().max(numeric.abs());
            let err = if scale < 1e-7 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
            if err > worst {
                worst = err;
                worst_at = format!("{name}[{j}]");
            }
        }
    }
    (worst, worst_at)
}
