use crate::error::{Error, Result};
use crate::model::{EncodedInput, LayerParams, SpanModel, SpanParams};
use crate::numerics::{
    gelu, gelu_backward, layer_norm, layer_norm_backward, matmul, matmul_nt, matmul_tn_acc,
    LayerNormCache, Matrix,
};
use crate::scalar::Real;

/// Logit assigned to positions that cannot hold an answer.
pub const MASKED_LOGIT: f64 = -1e9;

/// Contextual representation and span logits for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput<T> {
    pub hidden: Matrix<T>,
    pub start_logits: Vec<T>,
    pub end_logits: Vec<T>,
}

struct LayerCache<T> {
    input: Matrix<T>,
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    attn: Matrix<T>,
    context: Matrix<T>,
    ln1: LayerNormCache<T>,
    y: Matrix<T>,
    pre_act: Matrix<T>,
    act: Matrix<T>,
    ln2: LayerNormCache<T>,
}

/// Result of [`SpanModel::forward`]; keeps what the backward pass needs.
pub struct ForwardPass<T> {
    pub output: ForwardOutput<T>,
    token_ids: Vec<usize>,
    answer_mask: Vec<bool>,
    layers: Option<Vec<LayerCache<T>>>,
}

impl<T: Real> ForwardPass<T> {
    pub fn has_cache(&self) -> bool {
        self.layers.is_some()
    }
}

impl<T: Real> SpanModel<T> {
    fn check_input(&self, input: &EncodedInput) -> Result<()> {
        let l = self.config.max_len;
        if input.token_ids.len() != l || input.attention_mask.len() != l || input.answer_mask.len() != l {
            return Err(Error::shape(format!(
                "input of length {} for a model of length {l}",
                input.token_ids.len()
            )));
        }
        if let Some(&bad) = input.token_ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::shape(format!("token id {bad} outside vocabulary of {}", self.config.vocab_size)));
        }
        Ok(())
    }

    /// Forward pass retaining the activations needed by [`backward`](Self::backward).
    pub fn forward(&self, input: &EncodedInput) -> Result<ForwardPass<T>> {
        self.run(input, true)
    }

    /// Forward pass without activation cache.
    pub fn infer(&self, input: &EncodedInput) -> Result<ForwardOutput<T>> {
        Ok(self.run(input, false)?.output)
    }

    /// Independent per-input forward passes.
    pub fn infer_batch(&self, inputs: &[EncodedInput]) -> Result<Vec<ForwardOutput<T>>> {
        inputs.iter().map(|i| self.infer(i)).collect()
    }

    fn run(&self, input: &EncodedInput, keep: bool) -> Result<ForwardPass<T>> {
        self.check_input(input)?;
        let (l, h) = (self.config.max_len, self.config.hidden);
        let emb = &self.params.embedding;
        let mut x = Matrix::from_fn(l, h, |i, c| emb.get(input.token_ids[i], c) + self.positional.get(i, c));
        let mut caches = Vec::with_capacity(self.params.layers.len());
        for layer in &self.params.layers {
            let (next, cache) = layer_forward(layer, x, &input.attention_mask)?;
            x = next;
            if keep {
                caches.push(cache);
            }
        }
        let masked = T::lit(MASKED_LOGIT);
        let head = |weight: &[T], bias: &[T]| -> Vec<T> {
            (0..l)
                .map(|i| {
                    if input.answer_mask[i] {
                        dot(x.row(i), weight) + bias[i]
                    } else {
                        masked
                    }
                })
                .collect()
        };
        let start_logits = head(&self.params.start_weight, &self.params.start_bias);
        let end_logits = head(&self.params.end_weight, &self.params.end_bias);
        debug_assert!(x.is_finite(), "non-finite hidden state");
        Ok(ForwardPass {
            output: ForwardOutput { hidden: x, start_logits, end_logits },
            token_ids: input.token_ids.clone(),
            answer_mask: input.answer_mask.clone(),
            layers: keep.then_some(caches),
        })
    }

    /// Accumulates `dL/dθ` into `grads` given `dL/dz_s` and `dL/dz_e`.
    pub fn backward(
        &self,
        pass: &ForwardPass<T>,
        grad_start: &[T],
        grad_end: &[T],
        grads: &mut SpanParams<T>,
    ) -> Result<()> {
        let caches = pass
            .layers
            .as_ref()
            .ok_or_else(|| Error::State("backward called on a forward pass without cache".into()))?;
        let (l, h) = (self.config.max_len, self.config.hidden);
        if grad_start.len() != l || grad_end.len() != l {
            return Err(Error::shape("logit gradient length"));
        }
        let hidden = &pass.output.hidden;
        let mut dx = Matrix::zeros(l, h);
        for i in 0..l {
            if !pass.answer_mask[i] {
                continue;
            }
            let (gs, ge) = (grad_start[i], grad_end[i]);
            grads.start_bias[i] = grads.start_bias[i] + gs;
            grads.end_bias[i] = grads.end_bias[i] + ge;
            let row = hidden.row(i);
            let drow = dx.row_mut(i);
            for c in 0..h {
                grads.start_weight[c] = grads.start_weight[c] + gs * row[c];
                grads.end_weight[c] = grads.end_weight[c] + ge * row[c];
                drow[c] = gs * self.params.start_weight[c] + ge * self.params.end_weight[c];
            }
        }
        for ((layer, cache), lgrad) in
            self.params.layers.iter().zip(caches).zip(grads.layers.iter_mut()).rev()
        {
            dx = layer_backward(layer, cache, &dx, lgrad)?;
        }
        for (i, &id) in pass.token_ids.iter().enumerate() {
            let g = grads.embedding.row_mut(id);
            for (dst, &src) in g.iter_mut().zip(dx.row(i)) {
                *dst = *dst + src;
            }
        }
        Ok(())
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn add_rows<T: Real>(m: &Matrix<T>, bias: &[T]) -> Matrix<T> {
    Matrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c) + bias[c])
}

fn column_sums_into<T: Real>(m: &Matrix<T>, out: &mut [T]) {
    for r in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(r)) {
            *o = *o + v;
        }
    }
}

fn layer_forward<T: Real>(
    p: &LayerParams<T>,
    x: Matrix<T>,
    attend: &[bool],
) -> Result<(Matrix<T>, LayerCache<T>)> {
    let q = matmul(&x, &p.wq)?;
    let k = matmul(&x, &p.wk)?;
    let v = matmul(&x, &p.wv)?;
    let scale = T::one() / T::from_count(x.cols()).sqrt();
    let mut attn = matmul_nt(&q, &k)?;
    for i in 0..attn.rows() {
        let row = attn.row_mut(i);
        let mut max = T::neg_infinity();
        for (j, s) in row.iter_mut().enumerate() {
            if attend[j] {
                *s = *s * scale;
                max = max.max(*s);
            }
        }
        let mut total = T::zero();
        for (j, s) in row.iter_mut().enumerate() {
            *s = if attend[j] { (*s - max).exp() } else { T::zero() };
            total = total + *s;
        }
        row.iter_mut().for_each(|s| *s = *s / total);
    }
    let context = matmul(&attn, &v)?;
    let residual = x.add(&matmul(&context, &p.wo)?)?;
    let (y, ln1) = layer_norm(&residual, &p.ln1_gain, &p.ln1_bias)?;
    let pre_act = add_rows(&matmul(&y, &p.w1)?, &p.b1);
    let act = gelu(&pre_act);
    let ff = add_rows(&matmul(&act, &p.w2)?, &p.b2);
    let (out, ln2) = layer_norm(&y.add(&ff)?, &p.ln2_gain, &p.ln2_bias)?;
    Ok((out, LayerCache { input: x, q, k, v, attn, context, ln1, y, pre_act, act, ln2 }))
}

fn layer_backward<T: Real>(
    p: &LayerParams<T>,
    c: &LayerCache<T>,
    grad_out: &Matrix<T>,
    g: &mut LayerParams<T>,
) -> Result<Matrix<T>> {
    // second residual block
    let d_res2 = layer_norm_backward(&c.ln2, &p.ln2_gain, grad_out, &mut g.ln2_gain, &mut g.ln2_bias)?;
    matmul_tn_acc(&c.act, &d_res2, &mut g.w2)?;
    column_sums_into(&d_res2, &mut g.b2);
    let d_act = matmul_nt(&d_res2, &p.w2)?;
    let d_pre = gelu_backward(&c.pre_act, &d_act)?;
    matmul_tn_acc(&c.y, &d_pre, &mut g.w1)?;
    column_sums_into(&d_pre, &mut g.b1);
    let mut d_y = matmul_nt(&d_pre, &p.w1)?;
    d_y.add_assign(&d_res2)?;

    // attention block
    let d_res1 = layer_norm_backward(&c.ln1, &p.ln1_gain, &d_y, &mut g.ln1_gain, &mut g.ln1_bias)?;
    matmul_tn_acc(&c.context, &d_res1, &mut g.wo)?;
    let d_context = matmul_nt(&d_res1, &p.wo)?;
    let d_attn = matmul_nt(&d_context, &c.v)?;
    let mut d_v = Matrix::zeros(c.v.rows(), c.v.cols());
    matmul_tn_acc(&c.attn, &d_context, &mut d_v)?;
    let scale = T::one() / T::from_count(c.input.cols()).sqrt();
    let mut d_scores = Matrix::zeros(c.attn.rows(), c.attn.cols());
    for i in 0..c.attn.rows() {
        let a = c.attn.row(i);
        let da = d_attn.row(i);
        let inner = dot(a, da);
        let ds = d_scores.row_mut(i);
        for j in 0..a.len() {
            ds[j] = a[j] * (da[j] - inner) * scale;
        }
    }
    let d_q = matmul(&d_scores, &c.k)?;
    let mut d_k = Matrix::zeros(c.k.rows(), c.k.cols());
    matmul_tn_acc(&d_scores, &c.q, &mut d_k)?;
    matmul_tn_acc(&c.input, &d_q, &mut g.wq)?;
    matmul_tn_acc(&c.input, &d_k, &mut g.wk)?;
    matmul_tn_acc(&c.input, &d_v, &mut g.wv)?;

    let mut d_x = d_res1;
    d_x.add_assign(&matmul_nt(&d_q, &p.wq)?)?;
    d_x.add_assign(&matmul_nt(&d_k, &p.wk)?)?;
    d_x.add_assign(&matmul_nt(&d_v, &p.wv)?)?;
    Ok(d_x)
}
