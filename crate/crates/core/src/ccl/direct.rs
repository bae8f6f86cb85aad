//! Direct (nested-loop) correlation with per-axis boundary rules.
//!
//! Every output element accumulates its bias first, then contributions in
//! ascending `(input channel, z tap, φ tap)` order. The order does not depend
//! on the output position, so a column roll of the input yields a
//! bit-identical roll of the output under the circular φ rule.

use crate::error::{CclError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxisBoundary {
    /// Index arithmetic modulo the extent.
    Circular,
    /// Half-sample symmetric extension: `-1 ↦ 0`, `H ↦ H-1`.
    Symmetric,
    /// Out-of-range samples read as zero.
    Zero,
}

impl AxisBoundary {
    fn source(self, p: isize, n: usize) -> Option<usize> {
        let n = n as isize;
        match self {
            AxisBoundary::Circular => Some(p.rem_euclid(n) as usize),
            AxisBoundary::Symmetric => {
                let m = p.rem_euclid(2 * n);
                Some(if m >= n { 2 * n - 1 - m } else { m } as usize)
            }
            AxisBoundary::Zero => (0..n).contains(&p).then_some(p as usize),
        }
    }
}

/// Precomputed gather tables for one `(H, W, K_z, K_φ)` geometry.
#[derive(Debug, Clone)]
pub struct DirectCorrelation {
    height: usize,
    width: usize,
    kz: usize,
    kphi: usize,
    /// `rows[ki * H + z]` is the source row for output row `z`, tap `ki`.
    rows: Vec<Option<usize>>,
    /// `cols[kj * W + φ]` likewise for columns.
    cols: Vec<Option<usize>>,
}

impl DirectCorrelation {
    pub fn new(
        height: usize,
        width: usize,
        kz: usize,
        kphi: usize,
        z_rule: AxisBoundary,
        phi_rule: AxisBoundary,
    ) -> Result<Self> {
        if kz % 2 == 0 || kphi % 2 == 0 {
            return Err(CclError::InvalidKernel(format!(
                "kernel dims must be odd, got {kz}x{kphi}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(CclError::InvalidShape {
                shape: vec![height, width],
                reason: "empty map".into(),
            });
        }
        let (rz, rphi) = ((kz / 2) as isize, (kphi / 2) as isize);
        let rows = (0..kz as isize)
            .flat_map(|ki| (0..height as isize).map(move |z| z_rule.source(z + ki - rz, height)))
            .collect();
        let cols = (0..kphi as isize)
            .flat_map(|kj| {
                (0..width as isize).map(move |p| phi_rule.source(p + kj - rphi, width))
            })
            .collect();
        Ok(DirectCorrelation {
            height,
            width,
            kz,
            kphi,
            rows,
            cols,
        })
    }

    /// `input: [C_in, H, W]`, `weights: [C_out, C_in, K_z, K_φ]`, `bias: [C_out]`.
    pub fn forward<T: Scalar>(&self, input: &[T], weights: &[T], bias: &[T], c_in: usize) -> Vec<T> {
        let (h, w, kz, kphi) = (self.height, self.width, self.kz, self.kphi);
        let hw = h * w;
        let c_out = bias.len();
        debug_assert_eq!(input.len(), c_in * hw);
        debug_assert_eq!(weights.len(), c_out * c_in * kz * kphi);
        let mut out = vec![T::zero(); c_out * hw];
        for o in 0..c_out {
            let out_o = &mut out[o * hw..(o + 1) * hw];
            out_o.iter_mut().for_each(|v| *v = bias[o]);
            for c in 0..c_in {
                let in_c = &input[c * hw..(c + 1) * hw];
                let k = &weights[(o * c_in + c) * kz * kphi..][..kz * kphi];
                for ki in 0..kz {
                    for z in 0..h {
                        let Some(sr) = self.rows[ki * h + z] else { continue };
                        let src = &in_c[sr * w..(sr + 1) * w];
                        let dst = &mut out_o[z * w..(z + 1) * w];
                        for kj in 0..kphi {
                            let wt = k[ki * kphi + kj];
                            let cols = &self.cols[kj * w..(kj + 1) * w];
                            for (d, col) in dst.iter_mut().zip(cols) {
                                if let Some(sc) = *col {
                                    *d = *d + wt * src[sc];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`DirectCorrelation::forward`]: returns gradients with
    /// respect to input, weights and bias.
    pub fn backward<T: Scalar>(
        &self,
        input: &[T],
        weights: &[T],
        grad_out: &[T],
        c_in: usize,
        c_out: usize,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (h, w, kz, kphi) = (self.height, self.width, self.kz, self.kphi);
        let hw = h * w;
        let mut g_in = vec![T::zero(); c_in * hw];
        let mut g_w = vec![T::zero(); weights.len()];
        let mut g_b = vec![T::zero(); c_out];
        for o in 0..c_out {
            let g_o = &grad_out[o * hw..(o + 1) * hw];
            g_b[o] = g_o.iter().fold(T::zero(), |a, &x| a + x);
            for c in 0..c_in {
                let in_c = &input[c * hw..(c + 1) * hw];
                let gin_c = &mut g_in[c * hw..(c + 1) * hw];
                let base = (o * c_in + c) * kz * kphi;
                for ki in 0..kz {
                    for z in 0..h {
                        let Some(sr) = self.rows[ki * h + z] else { continue };
                        let g_row = &g_o[z * w..(z + 1) * w];
                        for kj in 0..kphi {
                            let wt = weights[base + ki * kphi + kj];
                            let cols = &self.cols[kj * w..(kj + 1) * w];
                            let mut acc = T::zero();
                            for (&g, col) in g_row.iter().zip(cols) {
                                if let Some(sc) = *col {
                                    acc = acc + g * in_c[sr * w + sc];
                                    gin_c[sr * w + sc] = gin_c[sr * w + sc] + wt * g;
                                }
                            }
                            g_w[base + ki * kphi + kj] = g_w[base + ki * kphi + kj] + acc;
                        }
                    }
                }
            }
        }
        (g_in, g_w, g_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_rules() {
        assert_eq!(AxisBoundary::Circular.source(-1, 5), Some(4));
        assert_eq!(AxisBoundary::Circular.source(5, 5), Some(0));
        assert_eq!(AxisBoundary::Symmetric.source(-1, 5), Some(0));
        assert_eq!(AxisBoundary::Symmetric.source(-2, 5), Some(1));
        assert_eq!(AxisBoundary::Symmetric.source(5, 5), Some(4));
        assert_eq!(AxisBoundary::Symmetric.source(6, 5), Some(3));
        assert_eq!(AxisBoundary::Zero.source(-1, 5), None);
        assert_eq!(AxisBoundary::Zero.source(4, 5), Some(4));
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(DirectCorrelation::new(4, 4, 2, 3, AxisBoundary::Zero, AxisBoundary::Zero).is_err());
    }
}
