use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpanParams;
use crate::scalar::Real;

/// AdamW hyperparameters with decoupled weight decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { learning_rate: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.005 }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.learning_rate >= 0.0) || !in_unit(self.beta1) || !in_unit(self.beta2) || !(self.eps > 0.0) || !(self.weight_decay >= 0.0)
        {
            return Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moment accumulators shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamWConfig,
    pub m: SpanParams<T>,
    pub v: SpanParams<T>,
    pub step: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: AdamWConfig, like: &SpanParams<T>) -> Result<Self> {
        config.validate()?;
        let mut m = like.clone();
        m.fill_zero();
        Ok(OptimizerState { config, v: m.clone(), m, step: 0 })
    }
}

/// One AdamW update of a single block. `step` is the 1-based step count
/// used for bias correction.
pub fn adamw_update<T: Real>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    config: &AdamWConfig,
) -> Result<()> {
    if grad.len() != theta.len() || m.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::shape("optimizer block length"));
    }
    if step == 0 {
        return Err(Error::State("optimizer step count starts at 1".into()));
    }
    let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
    let (lr, eps, wd) = (T::lit(config.learning_rate), T::lit(config.eps), T::lit(config.weight_decay));
    let exponent = i32::try_from(step).unwrap_or(i32::MAX);
    let c1 = T::one() - b1.powi(exponent);
    let c2 = T::one() - b2.powi(exponent);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] = theta[i] - lr * (m_hat / (v_hat.sqrt() + eps) + wd * theta[i]);
    }
    Ok(())
}

/// Applies one AdamW step to every parameter block.
pub fn optimizer_step<T: Real>(
    params: &mut SpanParams<T>,
    grads: &SpanParams<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    let grad_blocks = grads.named_blocks();
    let n = grad_blocks.len();
    let (thetas, ms, vs) = (params.blocks_mut(), state.m.blocks_mut(), state.v.blocks_mut());
    if thetas.len() != n || ms.len() != n || vs.len() != n {
        return Err(Error::shape("optimizer block count"));
    }
    let step = state.step + 1;
    for (((theta, (_, g)), m), v) in thetas.into_iter().zip(grad_blocks).zip(ms).zip(vs) {
        adamw_update(theta, g, m, v, step, &state.config)?;
    }
    state.step = step;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, SpanModel};

    fn scalar_step(theta: f64, g: f64, config: &AdamWConfig, steps: u64) -> Vec<f64> {
        let (mut t, mut m, mut v) = ([theta], [0.0], [0.0]);
        (1..=steps)
            .map(|s| {
                let before = t[0];
                adamw_update(&mut t, &[g], &mut m, &mut v, s, config).unwrap();
                t[0] - before
            })
            .collect()
    }

    #[test]
    fn null_update_without_decay() {
        let config = AdamWConfig { weight_decay: 0.0, learning_rate: 0.1, ..Default::default() };
        assert!(scalar_step(1.0, 0.0, &config, 5).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn decoupled_decay_example() {
        let config = AdamWConfig { learning_rate: 0.1, weight_decay: 0.005, ..Default::default() };
        let (mut t, mut m, mut v) = ([1.0f64], [0.0], [0.0]);
        adamw_update(&mut t, &[0.0], &mut m, &mut v, 1, &config).unwrap();
        assert!((t[0] - 0.9995).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_update_tends_to_lr() {
        let config = AdamWConfig { learning_rate: 0.01, weight_decay: 0.0, ..Default::default() };
        let deltas = scalar_step(0.0, 1.0, &config, 2000);
        assert!(deltas.iter().all(|d| (d + 0.01).abs() < 1e-8), "{:?}", &deltas[..3]);
    }

    #[test]
    fn step_over_params_and_shape_errors() {
        let cfg = ModelConfig { vocab_size: 110, hidden: 4, ff: 6, max_len: 8, layers: 1 };
        let mut model = SpanModel::<f64>::init(cfg, 3).unwrap();
        let before = model.params.clone();
        let mut grads = model.zero_grads();
        grads.start_bias[2] = 1.0;
        let mut state = OptimizerState::new(AdamWConfig { weight_decay: 0.0, learning_rate: 0.5, ..Default::default() }, &model.params).unwrap();
        optimizer_step(&mut model.params, &grads, &mut state).unwrap();
        assert_eq!(state.step, 1);
        assert!((model.params.start_bias[2] - (before.start_bias[2] - 0.5)).abs() < 1e-6);
        model.params.start_bias[3] = before.start_bias[3];
        assert_eq!(model.params.embedding, before.embedding);
        let other = SpanModel::<f64>::init(ModelConfig { max_len: 9, ..cfg }, 3).unwrap();
        assert!(matches!(optimizer_step(&mut model.params, &other.params, &mut state), Err(Error::Shape(_))));
        let (mut t, mut m, mut v) = ([0.0f64; 2], [0.0; 2], [0.0; 2]);
        assert!(matches!(adamw_update(&mut t, &[0.0], &mut m, &mut v, 1, &state.config), Err(Error::Shape(_))));
    }
}
