//! Stateless layer kernels over batched tensors.
//!
//! Spatial activations are `[N, C, H, W]`; flat activations are `[N, F]`.

use crate::error::{CclError, Result};
use crate::scalar::Scalar;
use crate::tensor::{CylinderMap, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolMode {
    Max,
    Avg,
}

impl std::str::FromStr for PoolMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "max" => Ok(PoolMode::Max),
            "avg" => Ok(PoolMode::Avg),
            other => Err(format!("unknown pool mode `{other}` (expected max or avg)")),
        }
    }
}

fn nchw(x: &Tensor<impl Scalar>) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(CclError::InvalidShape {
            shape: x.shape().to_vec(),
            reason: "expected [N, C, H, W]".into(),
        }),
    }
}

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(CclError::ShapeMismatch {
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(x, grad)?;
    Tensor::new(
        x.shape().to_vec(),
        x.data()
            .iter()
            .zip(grad.data())
            .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
            .collect(),
    )
}

/// Output extents of a `k × k`, stride-`s` max pool on an `H × W` cylinder
/// map: z keeps only full windows, φ starts a window at every multiple of
/// `s` and wraps, so `W_out = ceil(W / s)`.
pub fn maxpool_shape(h: usize, w: usize, k: usize, s: usize) -> Result<(usize, usize)> {
    if k == 0 || s == 0 {
        return Err(CclError::arg("empty pooling window or zero stride"));
    }
    if k > h || k > w {
        return Err(CclError::arg(format!("pool window {k} exceeds map {h}x{w}")));
    }
    Ok(((h - k) / s + 1, w.div_ceil(s)))
}

/// Returns the pooled tensor and, per output, the flat input offset of the
/// selected element. Ties go to the lowest flat offset.
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>, k: usize, s: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = nchw(x)?;
    let (oh, ow) = maxpool_shape(h, w, k, s)?;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(out.capacity());
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = T::neg_infinity();
                let mut best_at = usize::MAX;
                for di in 0..k {
                    for dj in 0..k {
                        let at = base + (i * s + di) * w + (j * s + dj) % w;
                        let v = data[at];
                        if v > best || (v == best && at < best_at) || best_at == usize::MAX {
                            best = v;
                            best_at = at;
                        }
                    }
                }
                out.push(best);
                arg.push(best_at);
            }
        }
    }
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, arg))
}

/// Routes each output gradient to the input element it was taken from.
pub fn pool_scatter_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad.len() {
        return Err(CclError::LengthMismatch {
            expected: argmax.len(),
            actual: grad.len(),
        });
    }
    let mut gx = Tensor::zeros(input_shape)?;
    let d = gx.data_mut();
    for (&at, &g) in argmax.iter().zip(grad.data()) {
        d[at] = d[at] + g;
    }
    Ok(gx)
}

/// Reduces the φ axis of every `(n, c, z)` row: `[N, C, H, W] → [N, C, H]`.
/// Max mode also returns the selected flat offsets (lowest on ties).
pub fn orbit_pool_forward<T: Scalar>(x: &Tensor<T>, mode: PoolMode) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = nchw(x)?;
    let mut out = Vec::with_capacity(n * c * h);
    let mut arg = Vec::new();
    for (r, row) in x.data().chunks_exact(w).enumerate() {
        match mode {
            PoolMode::Max => {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                out.push(row[best]);
                arg.push(r * w + best);
            }
            PoolMode::Avg => {
                let sum = row.iter().fold(T::zero(), |a, &v| a + v);
                out.push(sum / T::lit(w as f64));
            }
        }
    }
    Ok((Tensor::new(vec![n, c, h], out)?, arg))
}

pub fn orbit_pool_backward<T: Scalar>(
    input_shape: &[usize],
    mode: PoolMode,
    argmax: &[usize],
    grad: &Tensor<T>,
) -> Result<Tensor<T>> {
    match mode {
        PoolMode::Max => pool_scatter_backward(input_shape, argmax, grad),
        PoolMode::Avg => {
            let w = input_shape[3];
            let scale = T::one() / T::lit(w as f64);
            let mut gx = Tensor::zeros(input_shape)?;
            for (row, &g) in gx.data_mut().chunks_exact_mut(w).zip(grad.data()) {
                row.iter_mut().for_each(|v| *v = g * scale);
            }
            Ok(gx)
        }
    }
}

/// Orbit pooling of a single map: `[C, H, W] → [C, H]`.
pub fn orbit_pool<T: Scalar>(f: &CylinderMap<T>, mode: PoolMode) -> Result<Tensor<T>> {
    let batched = f.values().clone().reshape(&[1, f.channels(), f.height(), f.width()])?;
    orbit_pool_forward(&batched, mode)?.0.reshape(&[f.channels(), f.height()])
}

/// Mean over both spatial axes: `[N, C, H, W] → [N, C]`.
pub fn global_avg_pool_forward<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw(x)?;
    let scale = T::lit((h * w) as f64);
    let out = x
        .data()
        .chunks_exact(h * w)
        .map(|plane| plane.iter().fold(T::zero(), |a, &v| a + v) / scale)
        .collect();
    Tensor::new(vec![n, c], out)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad: &Tensor<T>) -> Result<Tensor<T>> {
    let hw = input_shape[2] * input_shape[3];
    let scale = T::one() / T::lit(hw as f64);
    let mut gx = Tensor::zeros(input_shape)?;
    for (plane, &g) in gx.data_mut().chunks_exact_mut(hw).zip(grad.data()) {
        plane.iter_mut().for_each(|v| *v = g * scale);
    }
    Ok(gx)
}

/// Fully connected layer, `y = W·x + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fc<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Fc<T> {
    pub fn glorot(l_in: usize, l_out: usize, seed: u64) -> Result<Self> {
        let limit = (6.0 / (l_in + l_out) as f64).sqrt();
        Ok(Fc {
            weight: Tensor::random_uniform(&[l_out, l_in], seed, T::lit(-limit), T::lit(limit))?,
            bias: Tensor::zeros(&[l_out])?,
        })
    }

    pub fn zeros(l_in: usize, l_out: usize) -> Result<Self> {
        Ok(Fc {
            weight: Tensor::zeros(&[l_out, l_in])?,
            bias: Tensor::zeros(&[l_out])?,
        })
    }

    pub fn l_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn l_out(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Flattens every non-batch axis of `x`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = x.shape()[0];
        let (l_in, l_out) = (self.l_in(), self.l_out());
        if x.len() != n * l_in {
            return Err(CclError::ShapeMismatch {
                expected: vec![n, l_in],
                actual: x.shape().to_vec(),
            });
        }
        let w = self.weight.data();
        let mut out = Vec::with_capacity(n * l_out);
        for row in x.data().chunks_exact(l_in) {
            for o in 0..l_out {
                let wr = &w[o * l_in..(o + 1) * l_in];
                let acc = wr.iter().zip(row).fold(self.bias.data()[o], |a, (&p, &q)| a + p * q);
                out.push(acc);
            }
        }
        Tensor::new(vec![n, l_out], out)
    }

    /// Returns `(grad_x, grad_weight, grad_bias)`; `grad_x` takes `x`'s shape.
    pub fn backward(&self, x: &Tensor<T>, grad: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let n = x.shape()[0];
        let (l_in, l_out) = (self.l_in(), self.l_out());
        if grad.shape() != [n, l_out] {
            return Err(CclError::ShapeMismatch {
                expected: vec![n, l_out],
                actual: grad.shape().to_vec(),
            });
        }
        let w = self.weight.data();
        let mut gx = vec![T::zero(); n * l_in];
        let mut gw = vec![T::zero(); l_out * l_in];
        let mut gb = vec![T::zero(); l_out];
        for s in 0..n {
            let xs = &x.data()[s * l_in..(s + 1) * l_in];
            let gs = &grad.data()[s * l_out..(s + 1) * l_out];
            let gxs = &mut gx[s * l_in..(s + 1) * l_in];
            for o in 0..l_out {
                let g = gs[o];
                gb[o] = gb[o] + g;
                let wr = &w[o * l_in..(o + 1) * l_in];
                let gwr = &mut gw[o * l_in..(o + 1) * l_in];
                for i in 0..l_in {
                    gxs[i] = gxs[i] + wr[i] * g;
                    gwr[i] = gwr[i] + xs[i] * g;
                }
            }
        }
        Ok((
            Tensor::new(x.shape().to_vec(), gx)?,
            Tensor::new(vec![l_out, l_in], gw)?,
            Tensor::new(vec![l_out], gb)?,
        ))
    }
}

/// Batch normalization over `(N, H, W)` per channel for spatial inputs, or
/// over `N` per feature for flat inputs. Running statistics follow
/// `r ← (1 − momentum)·r + momentum·batch`, with the unbiased variance
/// feeding the running estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
}

/// Saved values for [`BatchNorm::backward`].
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    train: bool,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(features: usize) -> Result<Self> {
        Ok(BatchNorm {
            gamma: Tensor::full(&[features], T::one())?,
            beta: Tensor::zeros(&[features])?,
            running_mean: Tensor::zeros(&[features])?,
            running_var: Tensor::full(&[features], T::one())?,
            momentum: 0.1,
            eps: 1e-5,
        })
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// `(batch, features, inner)` view of `x`.
    fn layout(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let n = x.shape()[0];
        let c = *x.shape().get(1).unwrap_or(&0);
        if c != self.features() {
            return Err(CclError::ShapeMismatch {
                expected: vec![n, self.features()],
                actual: x.shape().to_vec(),
            });
        }
        Ok((n, c, x.len() / (n * c)))
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (n, c, inner) = self.layout(x)?;
        let count = n * inner;
        let d = x.data();
        let mut out = vec![T::zero(); d.len()];
        let mut x_hat = vec![T::zero(); d.len()];
        let mut inv_std = vec![T::zero(); c];
        for ch in 0..c {
            let idx = |s: usize, i: usize| (s * c + ch) * inner + i;
            let (mean, var) = if train {
                let mut sum = T::zero();
                for s in 0..n {
                    for i in 0..inner {
                        sum = sum + d[idx(s, i)];
                    }
                }
                let mean = sum / T::lit(count as f64);
                let mut sq = T::zero();
                for s in 0..n {
                    for i in 0..inner {
                        let e = d[idx(s, i)] - mean;
                        sq = sq + e * e;
                    }
                }
                let var = sq / T::lit(count as f64);
                let m = T::lit(self.momentum);
                let unbiased = if count > 1 {
                    sq / T::lit((count - 1) as f64)
                } else {
                    var
                };
                let rm = &mut self.running_mean.data_mut()[ch];
                *rm = (T::one() - m) * *rm + m * mean;
                let rv = &mut self.running_var.data_mut()[ch];
                *rv = (T::one() - m) * *rv + m * unbiased;
                (mean, var)
            } else {
                (self.running_mean.data()[ch], self.running_var.data()[ch])
            };
            let is = T::one() / (var + T::lit(self.eps)).sqrt();
            inv_std[ch] = is;
            let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
            for s in 0..n {
                for i in 0..inner {
                    let k = idx(s, i);
                    let xh = (d[k] - mean) * is;
                    x_hat[k] = xh;
                    out[k] = g * xh + b;
                }
            }
        }
        Ok((
            Tensor::new(x.shape().to_vec(), out)?,
            BatchNormCache { x_hat, inv_std, train },
        ))
    }

    /// Returns `(grad_x, grad_gamma, grad_beta)`.
    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        grad: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let (n, c, inner) = self.layout(grad)?;
        let count = T::lit((n * inner) as f64);
        let gd = grad.data();
        let mut gx = vec![T::zero(); gd.len()];
        let mut gg = vec![T::zero(); c];
        let mut gb = vec![T::zero(); c];
        for ch in 0..c {
            let idx = |s: usize, i: usize| (s * c + ch) * inner + i;
            let (mut sum_g, mut sum_gx) = (T::zero(), T::zero());
            for s in 0..n {
                for i in 0..inner {
                    let k = idx(s, i);
                    sum_g = sum_g + gd[k];
                    sum_gx = sum_gx + gd[k] * cache.x_hat[k];
                }
            }
            gb[ch] = sum_g;
            gg[ch] = sum_gx;
            let scale = self.gamma.data()[ch] * cache.inv_std[ch];
            for s in 0..n {
                for i in 0..inner {
                    let k = idx(s, i);
                    gx[k] = if cache.train {
                        scale * (gd[k] - sum_g / count - cache.x_hat[k] * sum_gx / count)
                    } else {
                        scale * gd[k]
                    };
                }
            }
        }
        Ok((
            Tensor::new(grad.shape().to_vec(), gx)?,
            Tensor::new(vec![c], gg)?,
            Tensor::new(vec![c], gb)?,
        ))
    }
}

/// Softmax cross-entropy of one logit vector; returns `(loss, ∂loss/∂logits)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(CclError::arg(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &v| a + v);
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    grad[label] = grad[label] - T::one();
    Ok((loss, grad))
}

/// Mean softmax cross-entropy over a batch of logits `[N, K]`.
pub fn softmax_cross_entropy_batch<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, k) = match *logits.shape() {
        [n, k] => (n, k),
        _ => {
            return Err(CclError::InvalidShape {
                shape: logits.shape().to_vec(),
                reason: "logits must be [N, K]".into(),
            })
        }
    };
    if labels.len() != n {
        return Err(CclError::LengthMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let inv_n = T::one() / T::lit(n as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(n * k);
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let (l, g) = softmax_cross_entropy(row, label)?;
        total = total + l;
        grad.extend(g.into_iter().map(|v| v * inv_n));
    }
    Ok((total * inv_n, Tensor::new(vec![n, k], grad)?))
}
