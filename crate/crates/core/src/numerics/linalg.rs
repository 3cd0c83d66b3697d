use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `A · B`.
pub fn matmul<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.rows() {
        return Err(Error::shape(format!("matmul {:?} x {:?}", a.shape(), b.shape())));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(m, n);
    let bd = b.as_slice();
    for i in 0..m {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (p, &aip) in arow.iter().enumerate().take(k) {
            if aip == T::zero() {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + aip * bv;
            }
        }
    }
    Ok(out)
}

/// `A · Bᵀ`.
pub fn matmul_nt<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.cols() {
        return Err(Error::shape(format!("matmul_nt {:?} x {:?}ᵀ", a.shape(), b.shape())));
    }
    Ok(Matrix::from_fn(a.rows(), b.rows(), |i, j| {
        a.row(i).iter().zip(b.row(j)).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    }))
}

/// `out += Aᵀ · B`.
pub fn matmul_tn_acc<T: Real>(a: &Matrix<T>, b: &Matrix<T>, out: &mut Matrix<T>) -> Result<()> {
    if a.rows() != b.rows() || out.shape() != (a.cols(), b.cols()) {
        return Err(Error::shape(format!(
            "matmul_tn {:?}ᵀ x {:?} into {:?}",
            a.shape(),
            b.shape(),
            out.shape()
        )));
    }
    let n = b.cols();
    for r in 0..a.rows() {
        let arow = a.row(r);
        let brow = b.row(r);
        for (i, &ari) in arow.iter().enumerate() {
            if ari == T::zero() {
                continue;
            }
            let orow = &mut out.as_mut_slice()[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + ari * bv;
            }
        }
    }
    Ok(())
}

/// Gradients of `C = A · B` given `dL/dC`: returns `(dL/dA, dL/dB)`.
pub fn matmul_backward<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    grad_c: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    if grad_c.shape() != (a.rows(), b.cols()) || a.cols() != b.rows() {
        return Err(Error::shape("matmul backward shapes"));
    }
    let grad_a = matmul_nt(grad_c, b)?;
    let mut grad_b = Matrix::zeros(b.rows(), b.cols());
    matmul_tn_acc(a, grad_c, &mut grad_b)?;
    Ok((grad_a, grad_b))
}

/// Per-row statistics kept for [`layer_norm_backward`].
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    pub normalized: Matrix<T>,
    pub inv_std: Vec<T>,
}

/// Row-wise layer normalization `gain ⊙ (x − μ) / σ + bias`.
pub fn layer_norm<T: Real>(
    x: &Matrix<T>,
    gain: &[T],
    bias: &[T],
) -> Result<(Matrix<T>, LayerNormCache<T>)> {
    let width = x.cols();
    if gain.len() != width || bias.len() != width {
        return Err(Error::shape("layer norm parameter width"));
    }
    let n = T::from_count(width);
    let eps = T::lit(LAYER_NORM_EPS);
    let mut normalized = Matrix::zeros(x.rows(), width);
    let mut out = Matrix::zeros(x.rows(), width);
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let rstd = T::one() / (var + eps).sqrt();
        inv_std.push(rstd);
        let nrow = normalized.row_mut(r);
        for (o, &v) in nrow.iter_mut().zip(row) {
            *o = (v - mean) * rstd;
        }
        let orow = out.row_mut(r);
        for c in 0..width {
            orow[c] = gain[c] * normalized.get(r, c) + bias[c];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Backward pass of [`layer_norm`]. Accumulates parameter gradients and
/// returns `dL/dx`.
pub fn layer_norm_backward<T: Real>(
    cache: &LayerNormCache<T>,
    gain: &[T],
    grad_out: &Matrix<T>,
    grad_gain: &mut [T],
    grad_bias: &mut [T],
) -> Result<Matrix<T>> {
    let xhat = &cache.normalized;
    if grad_out.shape() != xhat.shape() {
        return Err(Error::shape("layer norm backward shapes"));
    }
    let width = xhat.cols();
    let n = T::from_count(width);
    let mut grad_x = Matrix::zeros(xhat.rows(), width);
    let mut dxhat = vec![T::zero(); width];
    for r in 0..xhat.rows() {
        let dy = grad_out.row(r);
        let xr = xhat.row(r);
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for c in 0..width {
            grad_gain[c] = grad_gain[c] + dy[c] * xr[c];
            grad_bias[c] = grad_bias[c] + dy[c];
            dxhat[c] = dy[c] * gain[c];
            sum_d = sum_d + dxhat[c];
            sum_dx = sum_dx + dxhat[c] * xr[c];
        }
        let scale = cache.inv_std[r] / n;
        let gx = grad_x.row_mut(r);
        for c in 0..width {
            gx[c] = scale * (n * dxhat[c] - sum_d - xr[c] * sum_dx);
        }
    }
    Ok(grad_x)
}

fn gelu_scalar<T: Real>(x: T) -> (T, T) {
    // tanh approximation and its derivative
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let k = T::lit(0.044715);
    let half = T::lit(0.5);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let value = half * x * (T::one() + t);
    let dinner = c * (T::one() + T::lit(3.0) * k * x * x);
    let deriv = half * (T::one() + t) + half * x * (T::one() - t * t) * dinner;
    (value, deriv)
}

pub fn gelu<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(x.rows(), x.cols(), |r, c| gelu_scalar(x.get(r, c)).0)
}

/// Given the pre-activation and `dL/dy`, returns `dL/dx`.
pub fn gelu_backward<T: Real>(pre: &Matrix<T>, grad_out: &Matrix<T>) -> Result<Matrix<T>> {
    if pre.shape() != grad_out.shape() {
        return Err(Error::shape("gelu backward shapes"));
    }
    Ok(Matrix::from_fn(pre.rows(), pre.cols(), |r, c| {
        gelu_scalar(pre.get(r, c)).1 * grad_out.get(r, c)
    }))
}
