//! FFT evaluation of the CCL.
//!
//! Each input channel is extended along z to `2H` rows by half-sample
//! symmetry (`[f₀ … f_{H-1}, f_{H-1} … f₀]`) and transformed on the
//! `2H × W` torus. Kernel taps at offsets `(i, j)`, `i ∈ [-r_z, r_z]`,
//! `j ∈ [-r_φ, r_φ]`, are zero-embedded at `(i mod 2H, j mod W)` (center at
//! the origin, negative offsets wrapped to the far end). Output channel `o`
//! is `ifft(Σ_c F_c ⊙ conj(K_{o,c}))` truncated to the first `H` rows, with
//! the channel sum taken in ascending `c` in the frequency domain.

use rustfft::num_complex::Complex;

use crate::error::{CclError, Result};
use crate::par;
use crate::scalar::Scalar;
use crate::spectral::Plan2d;

/// Where kernel taps land in the `2H × W` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelEmbedding {
    /// Center tap at the origin, negative offsets wrapped.
    #[default]
    Centered,
    /// Top-left tap at the origin. Computes a shifted correlation; only
    /// useful as a negative control for the equivalence checks.
    Corner,
}

#[derive(Debug, Clone)]
pub struct SpectralCorrelator<T: Scalar> {
    height: usize,
    width: usize,
    c_in: usize,
    c_out: usize,
    kz: usize,
    kphi: usize,
    embedding: KernelEmbedding,
    plan: Plan2d<T>,
    /// `kernel_hat[o * c_in + c]`, each `2H × W`.
    kernel_hat: Vec<Vec<Complex<T>>>,
}

fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Scalar> SpectralCorrelator<T> {
    /// `weights: [C_out, C_in, K_z, K_φ]` flat.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        weights: &[T],
        c_out: usize,
        c_in: usize,
        kz: usize,
        kphi: usize,
        height: usize,
        width: usize,
        embedding: KernelEmbedding,
    ) -> Result<Self> {
        if kz % 2 == 0 || kphi % 2 == 0 {
            return Err(CclError::InvalidKernel(format!(
                "kernel dims must be odd, got {kz}x{kphi}"
            )));
        }
        if kz > height || kphi > width {
            return Err(CclError::InvalidKernel(format!(
                "kernel {kz}x{kphi} exceeds map {height}x{width}"
            )));
        }
        let plan = Plan2d::new(2 * height, width)?;
        let mut this = SpectralCorrelator {
            height,
            width,
            c_in,
            c_out,
            kz,
            kphi,
            embedding,
            plan,
            kernel_hat: Vec::new(),
        };
        this.kernel_hat = par::map_indexed(c_out * c_in, |pair| {
            let taps = &weights[pair * kz * kphi..(pair + 1) * kz * kphi];
            let mut grid = this.embed(taps);
            this.plan.forward(&mut grid);
            grid
        });
        Ok(this)
    }

    fn tap_position(&self, ki: usize, kj: usize) -> usize {
        let rows = 2 * self.height;
        let (r, c) = match self.embedding {
            KernelEmbedding::Centered => {
                let i = ki as isize - (self.kz / 2) as isize;
                let j = kj as isize - (self.kphi / 2) as isize;
                (
                    i.rem_euclid(rows as isize) as usize,
                    j.rem_euclid(self.width as isize) as usize,
                )
            }
            KernelEmbedding::Corner => (ki, kj),
        };
        r * self.width + c
    }

    fn embed(&self, taps: &[T]) -> Vec<Complex<T>> {
        let mut grid = vec![czero(); self.plan.len()];
        for ki in 0..self.kz {
            for kj in 0..self.kphi {
                grid[self.tap_position(ki, kj)].re = taps[ki * self.kphi + kj];
            }
        }
        grid
    }

    fn extend_and_transform(&self, channel: &[T]) -> Vec<Complex<T>> {
        let (h, w) = (self.height, self.width);
        let mut grid = vec![czero(); 2 * h * w];
        for z in 0..h {
            for p in 0..w {
                let v = Complex::new(channel[z * w + p], T::zero());
                grid[z * w + p] = v;
                grid[(2 * h - 1 - z) * w + p] = v;
            }
        }
        self.plan.forward(&mut grid);
        grid
    }

    fn input_spectra(&self, input: &[T]) -> Vec<Vec<Complex<T>>> {
        let hw = self.height * self.width;
        par::map_indexed(self.c_in, |c| {
            self.extend_and_transform(&input[c * hw..(c + 1) * hw])
        })
    }

    pub fn forward(&self, input: &[T], bias: &[T]) -> Vec<T> {
        let hw = self.height * self.width;
        debug_assert_eq!(input.len(), self.c_in * hw);
        let spectra = self.input_spectra(input);
        let planes = par::map_indexed(self.c_out, |o| {
            let mut acc = vec![czero(); self.plan.len()];
            for (c, f_hat) in spectra.iter().enumerate() {
                let k_hat = &self.kernel_hat[o * self.c_in + c];
                for ((a, f), k) in acc.iter_mut().zip(f_hat).zip(k_hat) {
                    *a = *a + *f * k.conj();
                }
            }
            self.plan.inverse(&mut acc);
            acc[..hw].iter().map(|v| v.re + bias[o]).collect::<Vec<T>>()
        });
        planes.concat()
    }

    /// Gradients with respect to input, weights and bias.
    ///
    /// With the extended input `a` and the zero-extended output gradient `g`
    /// on the torus: `∂/∂k = ifft(â ⊙ conj(ĝ))` sampled at the tap positions,
    /// `∂/∂a = ifft(ĝ ⊙ k̂)`, folded back onto `H` rows (`z` and `2H−1−z`).
    pub fn backward(&self, input: &[T], grad_out: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (h, w) = (self.height, self.width);
        let hw = h * w;
        let spectra = self.input_spectra(input);
        let grad_hat: Vec<Vec<Complex<T>>> = par::map_indexed(self.c_out, |o| {
            let mut grid = vec![czero(); 2 * hw];
            for (dst, &g) in grid.iter_mut().zip(&grad_out[o * hw..(o + 1) * hw]) {
                dst.re = g;
            }
            self.plan.forward(&mut grid);
            grid
        });

        let g_bias = (0..self.c_out)
            .map(|o| grad_out[o * hw..(o + 1) * hw].iter().fold(T::zero(), |a, &x| a + x))
            .collect();

        let k_taps = self.kz * self.kphi;
        let g_weights = par::map_indexed(self.c_out * self.c_in, |pair| {
            let (o, c) = (pair / self.c_in, pair % self.c_in);
            let mut prod: Vec<Complex<T>> = spectra[c]
                .iter()
                .zip(&grad_hat[o])
                .map(|(a, g)| *a * g.conj())
                .collect();
            self.plan.inverse(&mut prod);
            let mut taps = vec![T::zero(); k_taps];
            for ki in 0..self.kz {
                for kj in 0..self.kphi {
                    taps[ki * self.kphi + kj] = prod[self.tap_position(ki, kj)].re;
                }
            }
            taps
        })
        .concat();

        let g_input = par::map_indexed(self.c_in, |c| {
            let mut acc = vec![czero(); 2 * hw];
            for (o, g_hat) in grad_hat.iter().enumerate() {
                let k_hat = &self.kernel_hat[o * self.c_in + c];
                for ((a, g), k) in acc.iter_mut().zip(g_hat).zip(k_hat) {
                    *a = *a + *g * *k;
                }
            }
            self.plan.inverse(&mut acc);
            let mut folded = vec![T::zero(); hw];
            for z in 0..h {
                for p in 0..w {
                    folded[z * w + p] = acc[z * w + p].re + acc[(2 * h - 1 - z) * w + p].re;
                }
            }
            folded
        })
        .concat();

        (g_input, g_weights, g_bias)
    }
}
