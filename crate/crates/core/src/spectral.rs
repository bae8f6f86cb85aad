//! FFT, DCT-II/III and correlation through the cross-correlation theorem.
//!
//! Conventions: the forward DFT is `X[k] = Σₙ x[n]·e^{-2πink/N}` (unnormalized)
//! and the inverse carries the `1/N`. Circular correlation is
//! `ifft(fft(f) ⊙ conj(fft(h)))`, i.e. `out[m] = Σₙ f[(n+m) mod N]·h[n]`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{CclError, Result};
use crate::scalar::Scalar;

/// Split real/imaginary storage for one complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBuffer<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> ComplexBuffer<T> {
    pub fn new(re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(CclError::LengthMismatch {
                expected: re.len(),
                actual: im.len(),
            });
        }
        Ok(ComplexBuffer { re, im })
    }

    pub fn from_real(re: &[T]) -> Self {
        ComplexBuffer {
            re: re.to_vec(),
            im: vec![T::zero(); re.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    fn to_interleaved(&self) -> Vec<Complex<T>> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex::new(re, im))
            .collect()
    }

    fn from_interleaved(buf: &[Complex<T>]) -> Self {
        ComplexBuffer {
            re: buf.iter().map(|c| c.re).collect(),
            im: buf.iter().map(|c| c.im).collect(),
        }
    }
}

/// Reusable forward/inverse transform pair for one length. Any `N ≥ 1` is
/// supported; rustfft picks mixed-radix, Rader or Bluestein strategies as
/// the factorization requires.
#[derive(Clone)]
pub struct SpectralPlan<T: Scalar> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for SpectralPlan<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("len", &self.len).finish()
    }
}

impl<T: Scalar> SpectralPlan<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(CclError::arg("transform length must be at least 1"));
        }
        let mut planner = FftPlanner::new();
        Ok(SpectralPlan {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len {
            return Err(CclError::LengthMismatch {
                expected: self.len,
                actual: n,
            });
        }
        Ok(())
    }

    /// In-place unnormalized forward transform of one or more consecutive
    /// length-`N` vectors.
    pub(crate) fn forward_inplace(&self, buf: &mut [Complex<T>]) {
        self.forward.process(buf);
    }

    /// In-place inverse transform including the `1/N` factor.
    pub(crate) fn inverse_inplace(&self, buf: &mut [Complex<T>]) {
        self.inverse.process(buf);
        let scale = T::one() / T::lit(self.len as f64);
        buf.iter_mut().for_each(|c| *c = *c * scale);
    }

    pub fn fft(&self, x: &ComplexBuffer<T>) -> Result<ComplexBuffer<T>> {
        self.check(x.len())?;
        let mut buf = x.to_interleaved();
        self.forward_inplace(&mut buf);
        Ok(ComplexBuffer::from_interleaved(&buf))
    }

    pub fn ifft(&self, x: &ComplexBuffer<T>) -> Result<ComplexBuffer<T>> {
        self.check(x.len())?;
        let mut buf = x.to_interleaved();
        self.inverse_inplace(&mut buf);
        Ok(ComplexBuffer::from_interleaved(&buf))
    }
}

pub fn fft<T: Scalar>(x: &ComplexBuffer<T>, plan: &SpectralPlan<T>) -> Result<ComplexBuffer<T>> {
    plan.fft(x)
}

pub fn ifft<T: Scalar>(x: &ComplexBuffer<T>, plan: &SpectralPlan<T>) -> Result<ComplexBuffer<T>> {
    plan.ifft(x)
}

/// Circular cross-correlation, returning the real output and the largest
/// imaginary residue left by the inverse transform.
pub fn circular_correlate_with_residue<T: Scalar>(
    f: &[T],
    h: &[T],
    plan: &SpectralPlan<T>,
) -> Result<(Vec<T>, T)> {
    plan.check(f.len())?;
    plan.check(h.len())?;
    let mut fb: Vec<Complex<T>> = f.iter().map(|&x| Complex::new(x, T::zero())).collect();
    let mut hb: Vec<Complex<T>> = h.iter().map(|&x| Complex::new(x, T::zero())).collect();
    plan.forward_inplace(&mut fb);
    plan.forward_inplace(&mut hb);
    for (a, b) in fb.iter_mut().zip(&hb) {
        *a = *a * b.conj();
    }
    plan.inverse_inplace(&mut fb);
    let residue = fb.iter().fold(T::zero(), |m, c| m.max(c.im.abs()));
    Ok((fb.iter().map(|c| c.re).collect(), residue))
}

/// `out[m] = Σₙ f[(n+m) mod N]·h[n]`. A kernel shorter than `N` must be
/// zero-embedded by the caller, negative offsets wrapped to the far end.
pub fn circular_correlate<T: Scalar>(f: &[T], h: &[T], plan: &SpectralPlan<T>) -> Result<Vec<T>> {
    circular_correlate_with_residue(f, h, plan).map(|(out, _)| out)
}

/// Half-sample symmetric extension of `f` to length `2H`:
/// `[f₀ … f_{H-1}, f_{H-1} … f₀]`.
pub fn symmetric_extend<T: Scalar>(f: &[T]) -> Vec<T> {
    f.iter().chain(f.iter().rev()).copied().collect()
}

/// Unnormalized DCT-II, `F_k = Σₙ fₙ cos(π/N·(n+½)·k)`.
///
/// Computed from one complex FFT of the length-2N even extension
/// `y = [x, reverse(x)]`: `F_k = ½·Re(e^{-iπk/2N}·Y_k)`.
pub fn dct2<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(CclError::arg("dct2 of an empty vector"));
    }
    let n = x.len();
    let plan = SpectralPlan::<T>::new(2 * n)?;
    let mut buf: Vec<Complex<T>> = symmetric_extend(x)
        .into_iter()
        .map(|v| Complex::new(v, T::zero()))
        .collect();
    plan.forward_inplace(&mut buf);
    let half = T::lit(0.5);
    Ok((0..n)
        .map(|k| {
            let theta = -std::f64::consts::PI * k as f64 / (2 * n) as f64;
            let twiddle = Complex::new(T::lit(theta.cos()), T::lit(theta.sin()));
            (buf[k] * twiddle).re * half
        })
        .collect())
}

/// Exact inverse of [`dct2`] (a scaled DCT-III):
/// `xₙ = (1/N)·(X₀ + 2·Σ_{k≥1} X_k cos(π/N·(n+½)·k))`.
///
/// Rebuilds the spectrum of the even extension, `Y_k = 2·e^{iπk/2N}·X_k`,
/// `Y_N = 0`, `Y_{2N-k} = conj(Y_k)`, and inverts it with one FFT.
pub fn dct3_inverse<T: Scalar>(coeffs: &[T]) -> Result<Vec<T>> {
    if coeffs.is_empty() {
        return Err(CclError::arg("dct3_inverse of an empty vector"));
    }
    let n = coeffs.len();
    let plan = SpectralPlan::<T>::new(2 * n)?;
    let mut buf = vec![Complex::new(T::zero(), T::zero()); 2 * n];
    let two = T::lit(2.0);
    for k in 0..n {
        let theta = std::f64::consts::PI * k as f64 / (2 * n) as f64;
        let twiddle = Complex::new(T::lit(theta.cos()), T::lit(theta.sin()));
        let y = twiddle * coeffs[k] * two;
        buf[k] = y;
        if k > 0 {
            buf[2 * n - k] = y.conj();
        }
    }
    plan.inverse_inplace(&mut buf);
    Ok(buf[..n].iter().map(|c| c.re).collect())
}

/// Correlation of `f` (length H) under half-sample symmetric extension with
/// a kernel `h` embedded in length `2H` (offset `i` stored at `i mod 2H`).
/// `plan` must have length `2H`.
pub fn symmetric_correlate<T: Scalar>(f: &[T], h: &[T], plan: &SpectralPlan<T>) -> Result<Vec<T>> {
    if plan.len() != 2 * f.len() {
        return Err(CclError::LengthMismatch {
            expected: plan.len(),
            actual: 2 * f.len(),
        });
    }
    let ext = symmetric_extend(f);
    let mut out = circular_correlate(&ext, h, plan)?;
    out.truncate(f.len());
    Ok(out)
}

/// Row/column 2-D transform over a `rows × cols` row-major complex grid.
#[derive(Clone, Debug)]
pub struct Plan2d<T: Scalar> {
    rows: usize,
    cols: usize,
    row_plan: SpectralPlan<T>,
    col_plan: SpectralPlan<T>,
}

impl<T: Scalar> Plan2d<T> {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        Ok(Plan2d {
            rows,
            cols,
            row_plan: SpectralPlan::new(cols)?,
            col_plan: SpectralPlan::new(rows)?,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn transpose(src: &[Complex<T>], dst: &mut [Complex<T>], rows: usize, cols: usize) {
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len());
        self.row_plan.forward_inplace(buf);
        let mut t = vec![Complex::new(T::zero(), T::zero()); buf.len()];
        Self::transpose(buf, &mut t, self.rows, self.cols);
        self.col_plan.forward_inplace(&mut t);
        Self::transpose(&t, buf, self.cols, self.rows);
    }

    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len());
        self.row_plan.inverse_inplace(buf);
        let mut t = vec![Complex::new(T::zero(), T::zero()); buf.len()];
        Self::transpose(buf, &mut t, self.rows, self.cols);
        self.col_plan.inverse_inplace(&mut t);
        Self::transpose(&t, buf, self.cols, self.rows);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CounterRng;

    fn naive_dft(re: &[f64], im: &[f64], sign: f64) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for k in 0..n {
            for j in 0..n {
                let a = sign * 2.0 * std::f64::consts::PI * (j * k % n) as f64 / n as f64;
                out_re[k] += re[j] * a.cos() - im[j] * a.sin();
                out_im[k] += re[j] * a.sin() + im[j] * a.cos();
            }
        }
        (out_re, out_im)
    }

    fn randv(rng: &mut CounterRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.next_normal()).collect()
    }

    fn direct_correlate(f: &[f64], h: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n)
            .map(|m| (0..n).map(|j| f[(j + m) % n] * h[j]).sum())
            .collect()
    }

    #[test]
    fn delta_and_constant_spectra() {
        let plan = SpectralPlan::<f64>::new(4).unwrap();
        let x = ComplexBuffer::from_real(&[1.0, 0.0, 0.0, 0.0]);
        let y = fft(&x, &plan).unwrap();
        assert_eq!(y.re, vec![1.0; 4]);
        assert_eq!(y.im, vec![0.0; 4]);
        let c = 2.5;
        let y = fft(&ComplexBuffer::from_real(&[c; 4]), &plan).unwrap();
        assert_eq!(y.re, vec![4.0 * c, 0.0, 0.0, 0.0]);
        assert!(y.im.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let plan = SpectralPlan::<f64>::new(4).unwrap();
        assert!(fft(&ComplexBuffer::from_real(&[1.0; 3]), &plan).is_err());
        assert!(circular_correlate(&[1.0; 4], &[1.0; 3], &plan).is_err());
        assert!(SpectralPlan::<f64>::new(0).is_err());
        assert!(ComplexBuffer::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn fft_matches_naive_dft_and_roundtrips() {
        let mut rng = CounterRng::new(1);
        for n in [1usize, 2, 7, 28, 100, 256] {
            let plan = SpectralPlan::<f64>::new(n).unwrap();
            let x = ComplexBuffer::new(randv(&mut rng, n), randv(&mut rng, n)).unwrap();
            let y = fft(&x, &plan).unwrap();
            let (nre, nim) = naive_dft(&x.re, &x.im, -1.0);
            for k in 0..n {
                assert!((y.re[k] - nre[k]).abs() < 1e-9 && (y.im[k] - nim[k]).abs() < 1e-9);
            }
            let back = ifft(&y, &plan).unwrap();
            for k in 0..n {
                assert!((back.re[k] - x.re[k]).abs() < 1e-12, "n={n}");
                assert!((back.im[k] - x.im[k]).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn parseval_and_linearity() {
        let mut rng = CounterRng::new(2);
        for n in [1usize, 2, 7, 28, 100, 256] {
            let plan = SpectralPlan::<f64>::new(n).unwrap();
            let x = randv(&mut rng, n);
            let y = randv(&mut rng, n);
            let fx = fft(&ComplexBuffer::from_real(&x), &plan).unwrap();
            let e_time: f64 = x.iter().map(|v| v * v).sum();
            let e_freq: f64 = fx.re.iter().zip(&fx.im).map(|(a, b)| a * a + b * b).sum::<f64>() / n as f64;
            assert!((e_time - e_freq).abs() <= 1e-10 * e_time);

            let (alpha, beta) = (0.7, -1.3);
            let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let fy = fft(&ComplexBuffer::from_real(&y), &plan).unwrap();
            let fm = fft(&ComplexBuffer::from_real(&mix), &plan).unwrap();
            let scale = fm.re.iter().chain(&fm.im).fold(1.0f64, |m, v| m.max(v.abs()));
            for k in 0..n {
                let er = alpha * fx.re[k] + beta * fy.re[k] - fm.re[k];
                let ei = alpha * fx.im[k] + beta * fy.im[k] - fm.im[k];
                assert!(er.abs() <= 1e-11 * scale && ei.abs() <= 1e-11 * scale);
            }

            let dm = dct2(&mix).unwrap();
            let (dx, dy) = (dct2(&x).unwrap(), dct2(&y).unwrap());
            let scale = dm.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for k in 0..n {
                assert!((alpha * dx[k] + beta * dy[k] - dm[k]).abs() <= 1e-11 * scale);
            }
        }
    }

    #[test]
    fn correlate_small_cases() {
        let plan = SpectralPlan::<f64>::new(4).unwrap();
        let out = circular_correlate(&[1.0; 4], &[1.0, 1.0, 0.0, 0.0], &plan).unwrap();
        for v in out {
            assert!((v - 2.0).abs() < 1e-14);
        }
        let f = [0.3, -1.0, 2.0, 5.0];
        let out = circular_correlate(&f, &[1.0, 0.0, 0.0, 0.0], &plan).unwrap();
        for (a, b) in out.iter().zip(&f) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn correlate_matches_direct_sum() {
        let mut rng = CounterRng::new(3);
        for n in [1usize, 2, 7, 13, 28, 100] {
            let plan = SpectralPlan::<f64>::new(n).unwrap();
            for _ in 0..200 {
                let f = randv(&mut rng, n);
                let h = randv(&mut rng, n);
                let (out, residue) = circular_correlate_with_residue(&f, &h, &plan).unwrap();
                let reference = direct_correlate(&f, &h);
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(residue <= 1e-10 * norm.max(1e-300));
                for (a, b) in out.iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-10, "n={n}");
                }
            }
        }
    }

    #[test]
    fn correlate_shift_covariance() {
        let mut rng = CounterRng::new(4);
        let n = 28;
        let plan = SpectralPlan::<f64>::new(n).unwrap();
        let f = randv(&mut rng, n);
        let h = randv(&mut rng, n);
        let base = circular_correlate(&f, &h, &plan).unwrap();
        for s in 0..n {
            // roll(f, s)[i] = f[(i - s) mod n]
            let rolled: Vec<f64> = (0..n).map(|i| f[(i + n - s) % n]).collect();
            let out = circular_correlate(&rolled, &h, &plan).unwrap();
            for i in 0..n {
                assert!((out[i] - base[(i + n - s) % n]).abs() < 1e-12);
            }
        }
    }

    fn direct_dct2(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (std::f64::consts::PI / n as f64 * (i as f64 + 0.5) * k as f64).cos())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn dct2_examples() {
        let c = 1.75f64;
        let out = dct2(&[c; 4]).unwrap();
        assert!((out[0] - 4.0 * c).abs() < 1e-14);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-14));
        let out = dct2(&[1.0f64, 0.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert!((out[1] - 0.7071067811865476).abs() < 1e-15);
        assert!(dct2::<f64>(&[]).is_err());
        assert!(dct3_inverse::<f64>(&[]).is_err());
    }

    #[test]
    fn dct_matches_direct_sum_and_roundtrips() {
        let mut rng = CounterRng::new(5);
        for n in [1usize, 2, 5, 28, 48] {
            for _ in 0..20 {
                let x = randv(&mut rng, n);
                let fast = dct2(&x).unwrap();
                for (a, b) in fast.iter().zip(direct_dct2(&x)) {
                    assert!((a - b).abs() < 1e-11);
                }
                let back = dct3_inverse(&fast).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    /// Direct correlation on an explicitly reflected, padded copy of `f`.
    fn padded_symmetric_oracle(f: &[f64], taps: &[(isize, f64)]) -> Vec<f64> {
        let h = f.len() as isize;
        let pad = taps.iter().map(|t| t.0.abs()).max().unwrap_or(0);
        let mut padded = Vec::new();
        for z in -pad..h + pad {
            let src = if z < 0 { -1 - z } else if z >= h { 2 * h - 1 - z } else { z };
            padded.push(f[src as usize]);
        }
        (0..h)
            .map(|z| taps.iter().map(|&(i, w)| w * padded[(z + i + pad) as usize]).sum())
            .collect()
    }

    fn embed(taps: &[(isize, f64)], len: usize) -> Vec<f64> {
        let mut h = vec![0.0; len];
        for &(i, w) in taps {
            h[i.rem_euclid(len as isize) as usize] += w;
        }
        h
    }

    #[test]
    fn symmetric_correlate_examples() {
        let f = [1.0, 2.0, 3.0, 4.0];
        let plan = SpectralPlan::<f64>::new(8).unwrap();
        let out = symmetric_correlate(&f, &embed(&[(0, 1.0)], 8), &plan).unwrap();
        for (a, b) in out.iter().zip(&f) {
            assert!((a - b).abs() < 1e-14);
        }
        let taps = [(-1, 1.0), (0, 1.0), (1, 0.0)];
        let out = symmetric_correlate(&f, &embed(&taps, 8), &plan).unwrap();
        let reference = padded_symmetric_oracle(&f, &taps);
        // by hand: f[-1] = f[0] = 1, so z=0 → 1+1 = 2
        assert_eq!(reference, vec![2.0, 3.0, 5.0, 7.0]);
        for (a, b) in out.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-13);
        }
        let constant = [3.0; 5];
        let plan10 = SpectralPlan::<f64>::new(10).unwrap();
        let taps = [(-2, 0.5), (-1, -1.0), (0, 2.0), (2, 0.25)];
        let out = symmetric_correlate(&constant, &embed(&taps, 10), &plan10).unwrap();
        for v in out {
            assert!((v - 1.75 * 3.0).abs() < 1e-13);
        }
        assert!(symmetric_correlate(&f, &embed(&taps, 10), &plan10).is_err());
    }

    #[test]
    fn symmetric_correlate_random_vs_oracle() {
        let mut rng = CounterRng::new(6);
        for h in [1usize, 3, 4, 9, 16] {
            let plan = SpectralPlan::<f64>::new(2 * h).unwrap();
            let r = (h as isize - 1) / 2;
            for _ in 0..50 {
                let f = randv(&mut rng, h);
                let taps: Vec<(isize, f64)> = (-r..=r).map(|i| (i, rng.next_normal())).collect();
                let out = symmetric_correlate(&f, &embed(&taps, 2 * h), &plan).unwrap();
                for (a, b) in out.iter().zip(padded_symmetric_oracle(&f, &taps)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn plan2d_roundtrip() {
        let mut rng = CounterRng::new(8);
        let plan = Plan2d::<f64>::new(6, 5).unwrap();
        let x: Vec<Complex<f64>> = (0..30).map(|_| Complex::new(rng.next_normal(), 0.0)).collect();
        let mut y = x.clone();
        plan.forward(&mut y);
        // DC term is the plain sum
        let sum: f64 = x.iter().map(|c| c.re).sum();
        assert!((y[0].re - sum).abs() < 1e-12);
        plan.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
