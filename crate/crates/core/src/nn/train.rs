//! Mini-batch training and evaluation loops.

use super::{AdamState, Network};
use crate::data::LabeledDataset;
use crate::error::{CclError, Result};
use crate::nn::layers::softmax_cross_entropy_batch;
use crate::scalar::Scalar;
use crate::tensor::{CounterRng, Tensor};

const EVAL_CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, weighted by batch size.
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

fn correct<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks_exact(k)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count()
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// One pass over `ds` in a shuffled order drawn from substream `epoch` of
/// `cfg.seed`; Adam step per mini-batch.
pub fn train_epoch<T: Scalar>(
    net: &mut Network<T>,
    adam: &mut AdamState<T>,
    ds: &LabeledDataset<T>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochMetrics> {
    if cfg.batch_size == 0 {
        return Err(CclError::arg("batch size must be positive"));
    }
    if ds.is_empty() {
        return Err(CclError::arg("cannot train on an empty dataset"));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    CounterRng::substream(cfg.seed, epoch as u64).shuffle(&mut order);
    let mut loss_sum = 0.0;
    let mut hits = 0;
    for idx in order.chunks(cfg.batch_size) {
        let (x, labels) = ds.batch(idx)?;
        let (logits, tape) = net.forward_train(&x)?;
        let (loss, grad) = softmax_cross_entropy_batch(&logits, &labels)?;
        if !loss.is_finite() {
            return Err(CclError::arg(format!("training diverged at epoch {epoch}")));
        }
        loss_sum += loss.to_f64_lossy() * idx.len() as f64;
        hits += correct(&logits, &labels);
        let (grads, _) = net.backward(&tape, &grad)?;
        adam.step(&mut net.params_mut(), &grads)?;
        net.refresh()?;
    }
    Ok(EpochMetrics {
        epoch,
        loss: loss_sum / ds.len() as f64,
        accuracy: hits as f64 / ds.len() as f64,
    })
}

/// Inference-mode loss and accuracy over the whole set.
pub fn evaluate<T: Scalar>(net: &mut Network<T>, ds: &LabeledDataset<T>) -> Result<EvalMetrics> {
    if ds.is_empty() {
        return Err(CclError::arg("cannot evaluate on an empty dataset"));
    }
    let mut loss_sum = 0.0;
    let mut hits = 0;
    let all: Vec<usize> = (0..ds.len()).collect();
    for idx in all.chunks(EVAL_CHUNK) {
        let (x, labels) = ds.batch(idx)?;
        let logits = net.logits(&x)?;
        let (loss, _) = softmax_cross_entropy_batch(&logits, &labels)?;
        loss_sum += loss.to_f64_lossy() * idx.len() as f64;
        hits += correct(&logits, &labels);
    }
    Ok(EvalMetrics {
        loss: loss_sum / ds.len() as f64,
        accuracy: hits as f64 / ds.len() as f64,
    })
}

/// Predicted class per sample.
pub fn predict<T: Scalar>(net: &mut Network<T>, ds: &LabeledDataset<T>) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ds.len());
    let all: Vec<usize> = (0..ds.len()).collect();
    for idx in all.chunks(EVAL_CHUNK) {
        let (x, _) = ds.batch(idx)?;
        let logits = net.logits(&x)?;
        let k = logits.shape()[1];
        out.extend(logits.data().chunks_exact(k).map(argmax));
    }
    Ok(out)
}
