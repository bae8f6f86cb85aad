//! Central finite-difference gradient checks.

use super::layers::softmax_cross_entropy_batch;
use super::{Network, NetworkSpec};
use crate::ccl::Mode;
use crate::error::Result;
use crate::tensor::Tensor;

/// Relative error `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Denominator floor used by the crate's checks; coordinates whose gradient
/// is smaller than this are compared in absolute terms.
pub const FLOOR: f64 = 1e-3;

/// Largest relative error over all coordinates of `x` (infinite if any is
/// NaN) between `analytic` and the central difference
/// `(loss(x + h·eᵢ) − loss(x − h·eᵢ)) / 2h`.
pub fn max_relative_error(
    mut loss: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    step: f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = loss(&probe);
        probe[i] = x[i] - step;
        let down = loss(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * step);
        let e = relative_error(analytic[i], numeric, FLOOR);
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
    }
    worst
}

fn batch_loss(net: &mut Network<f64>, x: &Tensor<f64>, labels: &[usize]) -> Result<f64> {
    net.refresh()?;
    let (logits, _) = net.forward_train(x)?;
    Ok(softmax_cross_entropy_batch(&logits, labels)?.0)
}

/// Worst relative error of the analytic gradient of the mean softmax
/// cross-entropy, over every parameter of `spec` and every input element, on
/// a random batch of `batch` samples. Step `1e-5`.
pub fn network_gradient_error(spec: &NetworkSpec, mode: Mode, seed: u64, batch: usize) -> Result<f64> {
    let mut net = Network::<f64>::build(spec, seed, mode)?;
    let mut shape = vec![batch];
    shape.extend_from_slice(&spec.input);
    let x = Tensor::<f64>::random_normal(&shape, seed.wrapping_add(100), 0.0, 1.0)?;
    let classes = net.num_classes();
    let labels: Vec<usize> = (0..batch).map(|i| i % classes).collect();

    let (logits, tape) = net.forward_train(&x)?;
    let (_, g) = softmax_cross_entropy_batch(&logits, &labels)?;
    let (grads, gx) = net.backward(&tape, &g)?;

    let mut worst = 0.0f64;
    let mut failure = None;
    for (p, grad) in grads.iter().enumerate() {
        let base = net.params_mut()[p].data().to_vec();
        let err = max_relative_error(
            |v| {
                net.params_mut()[p].data_mut().copy_from_slice(v);
                batch_loss(&mut net, &x, &labels).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    f64::NAN
                })
            },
            &base,
            grad.data(),
            1e-5,
        );
        net.params_mut()[p].data_mut().copy_from_slice(&base);
        worst = worst.max(err);
    }
    let err = max_relative_error(
        |v| {
            let xp = Tensor::new(x.shape().to_vec(), v.to_vec()).expect("same length");
            batch_loss(&mut net, &xp, &labels).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        x.data(),
        gx.data(),
        1e-5,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(worst.max(err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = [1.0, -2.0, 0.5];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let err = max_relative_error(|p| p.iter().map(|v| v * v).sum(), &x, &grad, 1e-5);
        assert!(err < 1e-9);
        let wrong = [2.0, -4.0, 2.0];
        assert!(max_relative_error(|p| p.iter().map(|v| v * v).sum(), &x, &wrong, 1e-5) > 0.1);
    }
}
