use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cross_entropy, pairwise_sum, softmax_temperature, Distribution, LOG_CLAMP};
use crate::scalar::Real;

pub const DEFAULT_LAMBDA1: f64 = 0.5;
pub const DEFAULT_LAMBDA2: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 2.0;

fn check_label<T: Real>(p: &Distribution<T>, index: usize, which: &str) -> Result<()> {
    if index >= p.len() {
        return Err(Error::InvalidLabel(format!("{which} index {index} outside {} positions", p.len())));
    }
    Ok(())
}

/// `-(ln p_s[gold_start] + ln p_e[gold_end])`.
pub fn nll_loss<T: Real>(
    p_start: &Distribution<T>,
    p_end: &Distribution<T>,
    gold_start: usize,
    gold_end: usize,
) -> Result<T> {
    check_label(p_start, gold_start, "start")?;
    check_label(p_end, gold_end, "end")?;
    let clamp = T::lit(LOG_CLAMP);
    Ok(-(p_start[gold_start].max(clamp).ln() + p_end[gold_end].max(clamp).ln()))
}

/// Mean of [`nll_loss`] over a batch.
pub fn nll_loss_batch<T: Real>(items: &[(Distribution<T>, Distribution<T>, usize, usize)]) -> Result<T> {
    if items.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let losses = items
        .iter()
        .map(|(ps, pe, s, e)| nll_loss(ps, pe, *s, *e))
        .collect::<Result<Vec<T>>>()?;
    Ok(pairwise_sum(&losses) / T::from_count(items.len()))
}

/// NLL at temperature 1 from raw logits, with its logit gradients `p - onehot`.
pub fn nll_logit_grads<T: Real>(
    start_logits: &[T],
    end_logits: &[T],
    gold: (usize, usize),
) -> Result<(T, Vec<T>, Vec<T>)> {
    let ps = softmax_temperature(start_logits, T::one())?;
    let pe = softmax_temperature(end_logits, T::one())?;
    let loss = nll_loss(&ps, &pe, gold.0, gold.1)?;
    let mut gs = ps.into_vec();
    let mut ge = pe.into_vec();
    gs[gold.0] = gs[gold.0] - T::one();
    ge[gold.1] = ge[gold.1] - T::one();
    Ok((loss, gs, ge))
}

fn kd_unscaled<T: Real>(teacher: &[T], student: &[T], tau: T) -> Result<T> {
    if teacher.len() != student.len() {
        return Err(Error::shape("teacher and student logits differ in length"));
    }
    cross_entropy(&softmax_temperature(teacher, tau)?, &softmax_temperature(student, tau)?)
}

/// `τ² · (CE(p_s, p_s_stu) + CE(p_e, p_e_stu))` with all distributions at temperature `τ`.
pub fn kd_loss<T: Real>(
    teacher_start: &[T],
    teacher_end: &[T],
    student_start: &[T],
    student_end: &[T],
    tau: T,
) -> Result<T> {
    let ce = kd_unscaled(teacher_start, student_start, tau)? + kd_unscaled(teacher_end, student_end, tau)?;
    Ok(ce * tau * tau)
}

/// Batch KD: per-sample cross-entropies are averaged, then scaled by `τ²`.
/// Each item is `(teacher_start, teacher_end, student_start, student_end)`.
pub fn kd_loss_batch<T: Real>(items: &[(&[T], &[T], &[T], &[T])], tau: T) -> Result<T> {
    if items.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let per_sample = items
        .iter()
        .map(|(ts, te, ss, se)| Ok(kd_unscaled(ts, ss, tau)? + kd_unscaled(te, se, tau)?))
        .collect::<Result<Vec<T>>>()?;
    Ok(pairwise_sum(&per_sample) / T::from_count(items.len()) * tau * tau)
}

/// KD loss for one sample and its student-logit gradients `τ (p_stu − p_teacher)`.
pub fn kd_logit_grads<T: Real>(
    teacher_start: &[T],
    teacher_end: &[T],
    student_start: &[T],
    student_end: &[T],
    tau: T,
) -> Result<(T, Vec<T>, Vec<T>)> {
    let grad = |teacher: &[T], student: &[T]| -> Result<(T, Vec<T>)> {
        if teacher.len() != student.len() {
            return Err(Error::shape("teacher and student logits differ in length"));
        }
        let pt = softmax_temperature(teacher, tau)?;
        let ps = softmax_temperature(student, tau)?;
        let ce = cross_entropy(&pt, &ps)?;
        let g = ps.probs().iter().zip(pt.probs()).map(|(&s, &t)| tau * (s - t)).collect();
        Ok((ce, g))
    };
    let (ce_s, gs) = grad(teacher_start, student_start)?;
    let (ce_e, ge) = grad(teacher_end, student_end)?;
    Ok(((ce_s + ce_e) * tau * tau, gs, ge))
}

/// Components of the combined objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub nll: T,
    pub kd: T,
    pub total: T,
    pub tau: T,
    pub lambda1: T,
    pub lambda2: T,
}

/// `λ1 · nll + λ2 · kd`.
pub fn total_loss<T: Real>(nll: T, kd: T, tau: T, lambda1: T, lambda2: T) -> Result<LossBreakdown<T>> {
    if lambda1 < T::zero() || lambda2 < T::zero() {
        return Err(Error::InvalidParameter(format!("negative loss weights ({lambda1}, {lambda2})")));
    }
    Ok(LossBreakdown { nll, kd, total: lambda1 * nll + lambda2 * kd, tau, lambda1, lambda2 })
}

/// Per-sample objective: hard-label NLL at τ = 1 plus optional τ-scaled KD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective { tau: DEFAULT_TAU, lambda1: DEFAULT_LAMBDA1, lambda2: DEFAULT_LAMBDA2 }
    }
}

impl Objective {
    /// Plain likelihood training.
    pub fn nll_only() -> Self {
        Objective { tau: 1.0, lambda1: 1.0, lambda2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau={}", self.tau)));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::InvalidParameter("negative loss weights".into()));
        }
        Ok(())
    }

    /// Loss and student-logit gradients for one sample. `teacher` holds the
    /// aggregated teacher logits; without it the KD term is zero.
    pub fn evaluate<T: Real>(
        &self,
        student_start: &[T],
        student_end: &[T],
        gold: (usize, usize),
        teacher: Option<(&[T], &[T])>,
    ) -> Result<(LossBreakdown<T>, Vec<T>, Vec<T>)> {
        let (l1, l2, tau) = (T::lit(self.lambda1), T::lit(self.lambda2), T::lit(self.tau));
        let (nll, mut gs, mut ge) = nll_logit_grads(student_start, student_end, gold)?;
        gs.iter_mut().chain(ge.iter_mut()).for_each(|g| *g = l1 * *g);
        let kd = match teacher {
            Some((ts, te)) => {
                let (kd, ks, ke) = kd_logit_grads(ts, te, student_start, student_end, tau)?;
                // with a zero weight the term is left out entirely so that the
                // update matches plain likelihood training bit for bit
                if self.lambda2 != 0.0 {
                    for (g, k) in gs.iter_mut().zip(&ks).chain(ge.iter_mut().zip(&ke)) {
                        *g = *g + l2 * *k;
                    }
                }
                kd
            }
            None => T::zero(),
        };
        Ok((total_loss(nll, kd, tau, l1, l2)?, gs, ge))
    }
}
