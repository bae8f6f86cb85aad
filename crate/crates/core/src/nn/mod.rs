//! A small feed-forward network stack: CCL and planar convolutions,
//! activations, pooling, batch norm, dense layers, softmax cross-entropy
//! and Adam.

mod adam;
mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod spec;
mod train;

use std::fmt;

pub use adam::AdamState;
pub use checkpoint::{checkpoint_precision, load_checkpoint, save_checkpoint};
pub use layers::{
    global_avg_pool_backward, global_avg_pool_forward, maxpool_forward, maxpool_shape,
    orbit_pool, orbit_pool_backward, orbit_pool_forward, relu_backward, relu_forward,
    softmax_cross_entropy, softmax_cross_entropy_batch, BatchNorm, Fc, PoolMode,
};
pub use spec::{LayerSpec, NetworkSpec};
pub use train::{evaluate, predict, train_epoch, EpochMetrics, EvalMetrics, TrainConfig};

use crate::ccl::{AxisBoundary, CclKernel, CclLayer, DirectCorrelation, Mode};
use crate::error::{CclError, Result};
use crate::par;
use crate::scalar::Scalar;
use crate::tensor::{CounterRng, CylinderMap, Tensor};

use layers::{pool_scatter_backward, BatchNormCache};

/// A resolved, initialized layer.
#[derive(Debug, Clone)]
pub enum Layer<T: Scalar> {
    Ccl(CclLayer<T>),
    /// Planar correlation with zero padding on both axes (the baseline).
    Conv {
        kernel: CclKernel<T>,
        engine: DirectCorrelation,
    },
    Relu,
    MaxPool { k: usize, s: usize },
    OrbitPool(PoolMode),
    GlobalAvgPool,
    BatchNorm(BatchNorm<T>),
    Fc(Fc<T>),
    /// Marks the logits; softmax itself is applied by the loss.
    Softmax,
}

enum Saved<T> {
    Nothing,
    Input(Tensor<T>),
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Shape(Vec<usize>),
    Bn(BatchNormCache<T>),
}

/// Values saved by a training forward pass for the backward pass.
pub struct Tape<T> {
    saved: Vec<Saved<T>>,
}

impl<T> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("layers", &self.saved.len()).finish()
    }
}

#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
    /// Per-sample output shape of every layer.
    shapes: Vec<Vec<usize>>,
    mode: Mode,
}

fn split_samples<T: Scalar>(x: &Tensor<T>, c: usize, h: usize, w: usize) -> Result<Vec<CylinderMap<T>>> {
    (0..x.shape()[0])
        .map(|s| CylinderMap::from_vec(c, h, w, x.outer(s).to_vec()))
        .collect()
}

fn stack<T: Scalar>(parts: Vec<Vec<T>>, sample_shape: &[usize]) -> Result<Tensor<T>> {
    let mut shape = vec![parts.len()];
    shape.extend_from_slice(sample_shape);
    Tensor::new(shape, parts.concat())
}

/// Sums per-sample tensors in ascending sample order.
fn sum_in_order<T: Scalar>(parts: impl IntoIterator<Item = Tensor<T>>) -> Option<Tensor<T>> {
    parts.into_iter().reduce(|acc, t| acc.add(&t).expect("equal shapes"))
}

impl<T: Scalar> Network<T> {
    /// Resolves `spec` and initializes parameters. Layer `i` draws its
    /// weights from substream `i` of `seed`.
    pub fn build(spec: &NetworkSpec, seed: u64, mode: Mode) -> Result<Self> {
        let shapes = spec.resolve()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut input = spec.input.to_vec();
        for (i, (ls, out)) in spec.layers.iter().zip(&shapes).enumerate() {
            let layer_seed = CounterRng::substream(seed, i as u64).next_u64();
            let layer = match *ls {
                LayerSpec::Ccl { c_out, kz, kphi } => {
                    let kernel = CclKernel::glorot(c_out, input[0], kz, kphi, layer_seed)?;
                    let mut layer = CclLayer::new(kernel, mode);
                    layer.prepare(input[1], input[2])?;
                    Layer::Ccl(layer)
                }
                LayerSpec::Conv { c_out, kz, kphi } => Layer::Conv {
                    kernel: CclKernel::glorot(c_out, input[0], kz, kphi, layer_seed)?,
                    engine: DirectCorrelation::new(
                        input[1],
                        input[2],
                        kz,
                        kphi,
                        AxisBoundary::Zero,
                        AxisBoundary::Zero,
                    )?,
                },
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { k, s } => Layer::MaxPool { k, s },
                LayerSpec::OrbitPool(m) => Layer::OrbitPool(m),
                LayerSpec::GlobalAvgPool(_) => Layer::GlobalAvgPool,
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(input[0])?),
                LayerSpec::Fc { l_in, l_out } => Layer::Fc(Fc::glorot(l_in, l_out, layer_seed)?),
                LayerSpec::Softmax => Layer::Softmax,
            };
            layers.push(layer);
            input = out.clone();
        }
        Ok(Network {
            spec: spec.clone(),
            layers,
            shapes,
            mode,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Per-sample output shapes, one per layer.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().map(|s| s[0]).unwrap_or(0)
    }

    pub fn set_mode(&mut self, mode: Mode) -> Result<()> {
        self.mode = mode;
        for l in &mut self.layers {
            if let Layer::Ccl(c) = l {
                c.set_mode(mode);
            }
        }
        self.refresh()
    }

    /// Rebuilds layer caches after parameter changes.
    pub fn refresh(&mut self) -> Result<()> {
        let mut input = self.spec.input.to_vec();
        for (l, out) in self.layers.iter_mut().zip(&self.shapes) {
            if let Layer::Ccl(c) = l {
                c.prepare(input[1], input[2])?;
            }
            input = out.clone();
        }
        Ok(())
    }

    /// Trainable parameters in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Ccl(c) => {
                    let k = c.kernel_mut();
                    let (w, b) = k.parts_mut();
                    out.push(w);
                    out.push(b);
                }
                Layer::Conv { kernel, .. } => {
                    let (w, b) = kernel.parts_mut();
                    out.push(w);
                    out.push(b);
                }
                Layer::BatchNorm(bn) => {
                    out.push(&mut bn.gamma);
                    out.push(&mut bn.beta);
                }
                Layer::Fc(fc) => {
                    out.push(&mut fc.weight);
                    out.push(&mut fc.bias);
                }
                _ => {}
            }
        }
        out
    }

    /// Parameters plus batch-norm running statistics, with names, in
    /// checkpoint order.
    pub fn state_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            match l {
                Layer::Ccl(c) => {
                    let (w, b) = c.kernel_mut().parts_mut();
                    out.push((format!("layer{i:02}_weight"), w));
                    out.push((format!("layer{i:02}_bias"), b));
                }
                Layer::Conv { kernel, .. } => {
                    let (w, b) = kernel.parts_mut();
                    out.push((format!("layer{i:02}_weight"), w));
                    out.push((format!("layer{i:02}_bias"), b));
                }
                Layer::BatchNorm(bn) => {
                    out.push((format!("layer{i:02}_gamma"), &mut bn.gamma));
                    out.push((format!("layer{i:02}_beta"), &mut bn.beta));
                    out.push((format!("layer{i:02}_running_mean"), &mut bn.running_mean));
                    out.push((format!("layer{i:02}_running_var"), &mut bn.running_var));
                }
                Layer::Fc(fc) => {
                    out.push((format!("layer{i:02}_weight"), &mut fc.weight));
                    out.push((format!("layer{i:02}_bias"), &mut fc.bias));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.len()).sum()
    }

    fn check_batch(&self, x: &Tensor<T>) -> Result<()> {
        let mut expected = vec![x.shape()[0]];
        expected.extend_from_slice(&self.spec.input);
        if x.shape() != expected.as_slice() {
            return Err(CclError::ShapeMismatch {
                expected,
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Inference-mode logits `[N, classes]` for a batch `[N, C, H, W]`.
    pub fn logits(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.run(x, false).map(|(y, _)| y)
    }

    /// Training-mode forward pass; batch norm uses batch statistics and
    /// updates its running estimates.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        self.run(x, true)
    }

    fn run(&mut self, x: &Tensor<T>, train: bool) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_batch(x)?;
        let n = x.shape()[0];
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        let mut in_shape = self.spec.input.to_vec();
        for (layer, out_shape) in self.layers.iter_mut().zip(&self.shapes) {
            let (next, keep) = match layer {
                Layer::Ccl(ccl) => {
                    let maps = split_samples(&cur, in_shape[0], in_shape[1], in_shape[2])?;
                    let outs = par::map_indexed(n, |s| {
                        ccl.forward_prepared(&maps[s]).map(|m| m.into_tensor().into_data())
                    });
                    let outs = outs.into_iter().collect::<Result<Vec<_>>>()?;
                    (stack(outs, out_shape)?, Saved::Input(cur))
                }
                Layer::Conv { kernel, engine } => {
                    let c_in = in_shape[0];
                    let k = &*kernel;
                    let outs = par::map_indexed(n, |s| {
                        engine.forward(cur.outer(s), k.weights().data(), k.bias().data(), c_in)
                    });
                    (stack(outs, out_shape)?, Saved::Input(cur))
                }
                Layer::Relu => (relu_forward(&cur), Saved::Input(cur)),
                Layer::MaxPool { k, s } => {
                    let (y, argmax) = maxpool_forward(&cur, *k, *s)?;
                    let input_shape = cur.shape().to_vec();
                    (y, Saved::Pool { input_shape, argmax })
                }
                Layer::OrbitPool(mode) => {
                    let (y, argmax) = orbit_pool_forward(&cur, *mode)?;
                    let input_shape = cur.shape().to_vec();
                    (y, Saved::Pool { input_shape, argmax })
                }
                Layer::GlobalAvgPool => {
                    let y = global_avg_pool_forward(&cur)?;
                    (y, Saved::Shape(cur.shape().to_vec()))
                }
                Layer::BatchNorm(bn) => {
                    let (y, cache) = bn.forward(&cur, train)?;
                    (y, Saved::Bn(cache))
                }
                Layer::Fc(fc) => {
                    let y = fc.forward(&cur)?;
                    (y, Saved::Input(cur))
                }
                Layer::Softmax => (cur, Saved::Nothing),
            };
            let mut shape = vec![n];
            shape.extend_from_slice(out_shape);
            cur = next.reshape(&shape)?;
            saved.push(if train { keep } else { Saved::Nothing });
            in_shape = out_shape.clone();
        }
        Ok((cur, Tape { saved }))
    }

    /// Gradients of all parameters (in [`Network::params_mut`] order) and of
    /// the input, given `∂loss/∂logits`.
    pub fn backward(&self, tape: &Tape<T>, grad_logits: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let n = grad_logits.shape()[0];
        let mut grads_rev: Vec<Tensor<T>> = Vec::new();
        let mut g = grad_logits.clone();
        for (idx, (layer, saved)) in self.layers.iter().zip(&tape.saved).enumerate().rev() {
            let in_shape: Vec<usize> = if idx == 0 {
                self.spec.input.to_vec()
            } else {
                self.shapes[idx - 1].clone()
            };
            let mut batched_in = vec![n];
            batched_in.extend_from_slice(&in_shape);
            g = match (layer, saved) {
                (Layer::Ccl(ccl), Saved::Input(x)) => {
                    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
                    let maps = split_samples(x, c, h, w)?;
                    let c_out = ccl.kernel().c_out();
                    let per = par::map_indexed(n, |s| {
                        let go = CylinderMap::from_vec(c_out, h, w, g.outer(s).to_vec())?;
                        ccl.backward_prepared(&maps[s], &go)
                    });
                    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
                    let mut gin = Vec::with_capacity(n);
                    let (mut gws, mut gbs) = (Vec::with_capacity(n), Vec::with_capacity(n));
                    for p in per {
                        gin.push(p.input.into_tensor().into_data());
                        gws.push(p.weights);
                        gbs.push(p.bias);
                    }
                    grads_rev.push(sum_in_order(gbs).expect("non-empty batch"));
                    grads_rev.push(sum_in_order(gws).expect("non-empty batch"));
                    stack(gin, &in_shape)?
                }
                (Layer::Conv { kernel, engine }, Saved::Input(x)) => {
                    let c_in = in_shape[0];
                    let c_out = kernel.c_out();
                    let per = par::map_indexed(n, |s| {
                        engine.backward(x.outer(s), kernel.weights().data(), g.outer(s), c_in, c_out)
                    });
                    let mut gin = Vec::with_capacity(n);
                    let (mut gws, mut gbs) = (Vec::with_capacity(n), Vec::with_capacity(n));
                    for (gi, gw, gb) in per {
                        gin.push(gi);
                        gws.push(Tensor::new(kernel.weights().shape().to_vec(), gw)?);
                        gbs.push(Tensor::new(vec![c_out], gb)?);
                    }
                    grads_rev.push(sum_in_order(gbs).expect("non-empty batch"));
                    grads_rev.push(sum_in_order(gws).expect("non-empty batch"));
                    stack(gin, &in_shape)?
                }
                (Layer::Relu, Saved::Input(x)) => relu_backward(x, &g.reshape(x.shape())?)?,
                (Layer::MaxPool { .. }, Saved::Pool { input_shape, argmax }) => {
                    pool_scatter_backward(input_shape, argmax, &g)?
                }
                (Layer::OrbitPool(mode), Saved::Pool { input_shape, argmax }) => {
                    orbit_pool_backward(input_shape, *mode, argmax, &g)?
                }
                (Layer::GlobalAvgPool, Saved::Shape(shape)) => global_avg_pool_backward(shape, &g)?,
                (Layer::BatchNorm(bn), Saved::Bn(cache)) => {
                    let (gx, gg, gb) = bn.backward(cache, &g)?;
                    grads_rev.push(gb);
                    grads_rev.push(gg);
                    gx
                }
                (Layer::Fc(fc), Saved::Input(x)) => {
                    let flat = x.clone().reshape(&[n, x.len() / n])?;
                    let (gx, gw, gb) = fc.backward(&flat, &g)?;
                    grads_rev.push(gb);
                    grads_rev.push(gw);
                    gx
                }
                (Layer::Softmax, _) => g,
                _ => return Err(CclError::arg("tape does not come from a training forward pass")),
            };
            g = g.reshape(&batched_in)?;
        }
        grads_rev.reverse();
        Ok((grads_rev, g))
    }
}

#[cfg(test)]
mod tests;
