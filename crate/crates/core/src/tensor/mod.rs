//! Dense row-major tensors and the cylinder feature map built on top of them.

mod dump;
mod rng;

use crate::error::{CclError, Result};
use crate::scalar::Scalar;

pub use dump::{decode_dump, encode_dump, read_dump, write_dump};
pub use rng::CounterRng;

/// Contiguous row-major tensor, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(CclError::InvalidShape {
            shape: shape.to_vec(),
            reason: "rank must be at least 1".into(),
        });
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(CclError::InvalidShape {
            shape: shape.to_vec(),
            reason: "all extents must be positive".into(),
        });
    }
    Ok(shape.iter().product())
}

/// Row-major strides for `shape`.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for axis in (0..shape.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    strides
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if len != data.len() {
            return Err(CclError::LengthMismatch {
                expected: len,
                actual: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        })
    }

    /// Samples `N(mean, stddev²)` elements from [`CounterRng`] seeded with `seed`.
    pub fn random_normal(shape: &[usize], seed: u64, mean: T, stddev: T) -> Result<Self> {
        if !(stddev >= T::zero()) {
            return Err(CclError::arg("stddev must be non-negative"));
        }
        let mut rng = CounterRng::new(seed);
        let (mean, stddev) = (mean.to_f64_lossy(), stddev.to_f64_lossy());
        Self::from_fn(shape, |_| T::lit(mean + stddev * rng.next_normal()))
    }

    /// Uniform samples in `[low, high)`.
    pub fn random_uniform(shape: &[usize], seed: u64, low: T, high: T) -> Result<Self> {
        let mut rng = CounterRng::new(seed);
        let (low, high) = (low.to_f64_lossy(), high.to_f64_lossy());
        Self::from_fn(shape, |_| T::lit(low + (high - low) * rng.next_f64()))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    /// Flat offset of a multi-index, `None` when out of range.
    pub fn offset(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.shape.len() {
            return None;
        }
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return None;
            }
            off = off * d + i;
        }
        Some(off)
    }

    /// Inverse of [`Tensor::offset`].
    pub fn unravel(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0; self.shape.len()];
        for axis in (0..self.shape.len()).rev() {
            index[axis] = offset % self.shape[axis];
            offset /= self.shape[axis];
        }
        index
    }

    pub fn get(&self, index: &[usize]) -> Option<T> {
        self.offset(index).map(|o| self.data[o])
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(CclError::ShapeMismatch {
                expected: self.shape,
                actual: shape.to_vec(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn elementwise(op: BinaryOp, a: &Self, b: &Self) -> Result<Self> {
        if a.shape != b.shape {
            return Err(CclError::ShapeMismatch {
                expected: a.shape.clone(),
                actual: b.shape.clone(),
            });
        }
        let f = |x: T, y: T| match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => x / y,
        };
        Ok(Tensor {
            shape: a.shape.clone(),
            data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::elementwise(BinaryOp::Add, self, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::elementwise(BinaryOp::Sub, self, other)
    }

    pub fn scale(&self, alpha: T) -> Self {
        self.map(|x| alpha * x)
    }

    /// Reduces over `axes`, removing them from the shape. Reducing every axis
    /// yields shape `[1]`. Each output accumulates its inputs in ascending
    /// flat-index order.
    pub fn reduce(&self, op: ReduceOp, axes: &[usize]) -> Result<Self> {
        let mut reduced = vec![false; self.rank()];
        for &axis in axes {
            if axis >= self.rank() || reduced[axis] {
                return Err(CclError::arg(format!(
                    "invalid reduction axis {axis} for rank {}",
                    self.rank()
                )));
            }
            reduced[axis] = true;
        }
        let mut out_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(&reduced)
            .filter(|(_, &r)| !r)
            .map(|(&d, _)| d)
            .collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let out_len: usize = out_shape.iter().product();
        let count: usize = self
            .shape
            .iter()
            .zip(&reduced)
            .filter(|(_, &r)| r)
            .map(|(&d, _)| d)
            .product();

        let init = match op {
            ReduceOp::Sum | ReduceOp::Mean => T::zero(),
            ReduceOp::Max => T::neg_infinity(),
        };
        let mut out = vec![init; out_len];
        let mut index = vec![0usize; self.rank()];
        for &x in &self.data {
            let mut o = 0;
            for (axis, &i) in index.iter().enumerate() {
                if !reduced[axis] {
                    o = o * self.shape[axis] + i;
                }
            }
            match op {
                ReduceOp::Sum | ReduceOp::Mean => out[o] = out[o] + x,
                ReduceOp::Max => {
                    if x > out[o] {
                        out[o] = x
                    }
                }
            }
            for axis in (0..self.rank()).rev() {
                index[axis] += 1;
                if index[axis] < self.shape[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
        if op == ReduceOp::Mean {
            let n = T::lit(count as f64);
            out.iter_mut().for_each(|v| *v = *v / n);
        }
        Tensor::new(out_shape, out)
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::lit(self.data.len() as f64)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(CclError::ShapeMismatch {
                expected: self.shape.clone(),
                actual: other.shape.clone(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
            .fold(0.0, f64::max))
    }

    /// Converts to another precision.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::lit(x.to_f64_lossy())).collect(),
        }
    }

    /// Slice along the leading axis.
    pub fn outer(&self, i: usize) -> &[T] {
        let inner = self.data.len() / self.shape[0];
        &self.data[i * inner..(i + 1) * inner]
    }

    pub fn outer_mut(&mut self, i: usize) -> &mut [T] {
        let inner = self.data.len() / self.shape[0];
        &mut self.data[i * inner..(i + 1) * inner]
    }
}

/// A feature map on the discretized cylinder, stored as `[C, H, W]`:
/// channels, z rows (bounded), φ columns (periodic).
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderMap<T> {
    values: Tensor<T>,
}

impl<T: Scalar> CylinderMap<T> {
    pub fn new(values: Tensor<T>) -> Result<Self> {
        if values.rank() != 3 {
            return Err(CclError::InvalidShape {
                shape: values.shape().to_vec(),
                reason: "cylinder maps are [channels, height, width]".into(),
            });
        }
        Ok(CylinderMap { values })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[channels, height, width])?)
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        Self::new(Tensor::new(vec![channels, height, width], data)?)
    }

    pub fn random_normal(channels: usize, height: usize, width: usize, seed: u64) -> Result<Self> {
        Self::new(Tensor::random_normal(
            &[channels, height, width],
            seed,
            T::zero(),
            T::one(),
        )?)
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    #[inline]
    pub fn at(&self, c: usize, z: usize, phi: usize) -> T {
        self.values.data()[(c * self.height() + z) * self.width() + phi]
    }

    pub fn set(&mut self, c: usize, z: usize, phi: usize, v: T) {
        let (h, w) = (self.height(), self.width());
        self.values.data_mut()[(c * h + z) * w + phi] = v;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        self.values.outer(c)
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn data(&self) -> &[T] {
        self.values.data()
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        self.values.data_mut()
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.values
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.values.max_abs_diff(&other.values)
    }
}
