use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    /// Elementwise sum with a matrix of the same shape.
    pub fn add(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add_assign(&mut self, other: &Matrix<T>) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &Matrix<T>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// A probability vector: non-negative entries summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T>(Vec<T>);

impl<T: Real> Distribution<T> {
    /// Simplex tolerance: `1e-9` for `f64`, widened for coarser scalars.
    pub fn tolerance() -> T {
        T::lit(1e-9).max(T::epsilon() * T::lit(256.0))
    }

    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if probs.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(Error::InvalidParameter("negative or non-finite probability".into()));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > Self::tolerance() {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(Distribution(probs))
    }

    pub fn uniform(len: usize) -> Self {
        Distribution(vec![T::one() / T::from_count(len); len])
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut probs = vec![T::zero(); len];
        probs[index] = T::one();
        Distribution(probs)
    }

    pub(crate) fn from_raw(probs: Vec<T>) -> Self {
        Distribution(probs)
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T> std::ops::Index<usize> for Distribution<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}
