use crate::error::{CclError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Adam with bias correction:
///
/// ```text
/// m ← β₁m + (1−β₁)g        v ← β₂v + (1−β₂)g²
/// p ← p − lr · (m / (1−β₁ᵗ)) / (√(v / (1−β₂ᵗ)) + ε)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Defaults: `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update. Moment buffers are created on the first call and
    /// must keep matching the parameter shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(CclError::LengthMismatch {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        if self.m.is_empty() {
            for p in params.iter() {
                self.m.push(Tensor::zeros(p.shape())?);
                self.v.push(Tensor::zeros(p.shape())?);
            }
        }
        if self.m.len() != params.len() {
            return Err(CclError::LengthMismatch {
                expected: self.m.len(),
                actual: params.len(),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(CclError::ShapeMismatch {
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(t));
        let c2 = T::lit(1.0 - self.beta2.powi(t));
        let (lr, eps) = (T::lit(self.lr), T::lit(self.eps));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            for i in 0..pd.len() {
                let gi = g.data()[i];
                let mi = b1 * m.data()[i] + (T::one() - b1) * gi;
                let vi = b2 * v.data()[i] + (T::one() - b2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                pd[i] = pd[i] - lr * (mi / c1) / ((vi / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::new(vec![3], vec![1.0f64, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut adam = AdamState::new(0.001);
        adam.step(&mut [&mut p], &[Tensor::zeros(&[3]).unwrap()]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn single_step_matches_hand_rolled_update() {
        let mut p = Tensor::new(vec![1], vec![1.0f64]).unwrap();
        let mut adam = AdamState::new(0.001);
        adam.step(&mut [&mut p], &[Tensor::full(&[1], 1.0).unwrap()]).unwrap();
        let m = 0.1 * 1.0;
        let v = 0.001 * 1.0;
        let m_hat = m / (1.0 - 0.9);
        let v_hat = v / (1.0 - 0.999);
        let expected = 1.0 - 0.001 * m_hat / (f64::sqrt(v_hat) + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] - 0.999).abs() < 1e-10);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::<f64>::zeros(&[2]).unwrap();
        let mut adam = AdamState::new(0.001);
        assert!(adam.step(&mut [&mut p], &[Tensor::zeros(&[3]).unwrap()]).is_err());
        assert!(adam.step(&mut [&mut p], &[]).is_err());
    }
}
