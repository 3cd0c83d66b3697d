use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Standard deviation of the Gaussian used for every weight at init.
pub const INIT_STD: f64 = 0.01;

/// Parameters of one encoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    pub wo: Matrix<T>,
    pub ln1_gain: Vec<T>,
    pub ln1_bias: Vec<T>,
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
    pub ln2_gain: Vec<T>,
    pub ln2_bias: Vec<T>,
}

/// All trainable parameters. Gradients and optimizer moments use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanParams<T> {
    pub embedding: Matrix<T>,
    pub layers: Vec<LayerParams<T>>,
    pub start_weight: Vec<T>,
    pub start_bias: Vec<T>,
    pub end_weight: Vec<T>,
    pub end_bias: Vec<T>,
}

impl<T: Real> SpanParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (h, f, l) = (config.hidden, config.ff, config.max_len);
        let layer = || LayerParams {
            wq: Matrix::zeros(h, h),
            wk: Matrix::zeros(h, h),
            wv: Matrix::zeros(h, h),
            wo: Matrix::zeros(h, h),
            ln1_gain: vec![T::zero(); h],
            ln1_bias: vec![T::zero(); h],
            w1: Matrix::zeros(h, f),
            b1: vec![T::zero(); f],
            w2: Matrix::zeros(f, h),
            b2: vec![T::zero(); h],
            ln2_gain: vec![T::zero(); h],
            ln2_bias: vec![T::zero(); h],
        };
        SpanParams {
            embedding: Matrix::zeros(config.vocab_size, h),
            layers: (0..config.layers).map(|_| layer()).collect(),
            start_weight: vec![T::zero(); h],
            start_bias: vec![T::zero(); l],
            end_weight: vec![T::zero(); h],
            end_bias: vec![T::zero(); l],
        }
    }

    /// Parameter blocks with stable names, in checkpoint order.
    pub fn named_blocks(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = vec![("embedding".into(), self.embedding.as_slice())];
        for (i, layer) in self.layers.iter().enumerate() {
            let blocks: [(&str, &[T]); 12] = [
                ("wq", layer.wq.as_slice()),
                ("wk", layer.wk.as_slice()),
                ("wv", layer.wv.as_slice()),
                ("wo", layer.wo.as_slice()),
                ("ln1_gain", &layer.ln1_gain),
                ("ln1_bias", &layer.ln1_bias),
                ("w1", layer.w1.as_slice()),
                ("b1", &layer.b1),
                ("w2", layer.w2.as_slice()),
                ("b2", &layer.b2),
                ("ln2_gain", &layer.ln2_gain),
                ("ln2_bias", &layer.ln2_bias),
            ];
            out.extend(blocks.into_iter().map(|(n, b)| (format!("layers.{i}.{n}"), b)));
        }
        out.push(("start_weight".into(), &self.start_weight));
        out.push(("start_bias".into(), &self.start_bias));
        out.push(("end_weight".into(), &self.end_weight));
        out.push(("end_bias".into(), &self.end_bias));
        out
    }

    /// Mutable blocks in the same order as [`named_blocks`](Self::named_blocks).
    pub fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![self.embedding.as_mut_slice()];
        for layer in &mut self.layers {
            out.push(layer.wq.as_mut_slice());
            out.push(layer.wk.as_mut_slice());
            out.push(layer.wv.as_mut_slice());
            out.push(layer.wo.as_mut_slice());
            out.push(&mut layer.ln1_gain);
            out.push(&mut layer.ln1_bias);
            out.push(layer.w1.as_mut_slice());
            out.push(&mut layer.b1);
            out.push(layer.w2.as_mut_slice());
            out.push(&mut layer.b2);
            out.push(&mut layer.ln2_gain);
            out.push(&mut layer.ln2_bias);
        }
        out.push(&mut self.start_weight);
        out.push(&mut self.start_bias);
        out.push(&mut self.end_weight);
        out.push(&mut self.end_bias);
        out
    }

    pub fn num_values(&self) -> usize {
        self.named_blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.named_blocks().into_iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    pub fn fill_zero(&mut self) {
        for block in self.blocks_mut() {
            block.fill(T::zero());
        }
    }

    /// `sqrt(sum of squares)` over every block.
    pub fn global_norm(&self) -> T {
        let sq: T = self
            .named_blocks()
            .iter()
            .flat_map(|(_, b)| b.iter())
            .fold(T::zero(), |acc, &v| acc + v * v);
        sq.sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v = *v * factor);
        }
    }

    pub fn add_scaled(&mut self, other: &SpanParams<T>, factor: T) -> Result<()> {
        let theirs = other.named_blocks();
        let mine = self.blocks_mut();
        if mine.len() != theirs.len() {
            return Err(Error::shape("parameter block count"));
        }
        for (dst, (name, src)) in mine.into_iter().zip(theirs) {
            if dst.len() != src.len() {
                return Err(Error::shape(format!("block {name}")));
            }
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + s * factor;
            }
        }
        Ok(())
    }
}

/// The span model: trainable parameters plus the fixed sinusoidal position table.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanModel<T> {
    pub config: ModelConfig,
    pub params: SpanParams<T>,
    pub positional: Matrix<T>,
}

/// `P[pos][2i] = sin(pos / 10000^(2i/h))`, `P[pos][2i+1] = cos(…)`.
pub fn sinusoidal_table<T: Real>(max_len: usize, hidden: usize) -> Matrix<T> {
    Matrix::from_fn(max_len, hidden, |pos, c| {
        let pair = (c / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * pair / hidden as f64);
        T::lit(if c % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}

impl<T: Real> SpanModel<T> {
    /// Weight matrices and head vectors ~ N(0, 0.01²); biases 0; layer-norm gains 1.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::init_with_std(config, seed, INIT_STD)
    }

    pub fn init_with_std(config: ModelConfig, seed: u64, std: f64) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |m: &mut [T]| m.iter_mut().for_each(|v| *v = T::lit(normal.sample(&mut rng)));
        let mut params = SpanParams::zeros(&config);
        draw(params.embedding.as_mut_slice());
        for layer in &mut params.layers {
            draw(layer.wq.as_mut_slice());
            draw(layer.wk.as_mut_slice());
            draw(layer.wv.as_mut_slice());
            draw(layer.wo.as_mut_slice());
            draw(layer.w1.as_mut_slice());
            draw(layer.w2.as_mut_slice());
            layer.ln1_gain.fill(T::one());
            layer.ln2_gain.fill(T::one());
        }
        draw(&mut params.start_weight);
        draw(&mut params.end_weight);
        Ok(SpanModel { config, params, positional: sinusoidal_table(config.max_len, config.hidden) })
    }

    pub fn from_params(config: ModelConfig, params: SpanParams<T>) -> Result<Self> {
        config.validate()?;
        let expected = SpanParams::<T>::zeros(&config);
        let ok = expected
            .named_blocks()
            .iter()
            .zip(params.named_blocks())
            .all(|((_, a), (_, b))| a.len() == b.len())
            && expected.named_blocks().len() == params.named_blocks().len();
        if !ok {
            return Err(Error::shape("parameters do not match the model config"));
        }
        Ok(SpanModel { config, params, positional: sinusoidal_table(config.max_len, config.hidden) })
    }

    pub fn zero_grads(&self) -> SpanParams<T> {
        SpanParams::zeros(&self.config)
    }
}
