//! The self-check suite behind `ccl verify`: path equivalence, roll
//! equivariance, adjointness, FFT/DCT round trips, gradient checks and
//! pooled-network invariance, each reduced to one scalar metric.

use std::fmt;
use std::path::Path;

use super::report::{fmt_f64, write_csv};
use crate::ccl::{CclKernel, CclLayer, KernelEmbedding, Mode};
use crate::error::Result;
use crate::group_action::roll;
use crate::nn::gradcheck::network_gradient_error;
use crate::nn::{Network, NetworkSpec};
use crate::scalar::{Precision, Scalar};
use crate::spectral::{dct2, dct3_inverse, ComplexBuffer, SpectralPlan};
use crate::tensor::{CounterRng, CylinderMap, Tensor};

/// Deliberate defects used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Spectral path embeds kernels at the grid corner instead of centring
    /// them on the origin.
    KernelEmbedding,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kernel-embedding" => Ok(Fault::KernelEmbedding),
            other => Err(format!("unknown fault `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random `(f, k)` pairs per size in the equivalence check.
    pub trials: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            trials: 10,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub metric: f64,
    pub threshold: f64,
    /// The metric must be exactly zero.
    pub exact: bool,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        if self.exact {
            self.metric == 0.0
        } else {
            self.metric < self.threshold
        }
    }

    pub fn margin(&self) -> f64 {
        self.threshold - self.metric
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.exact { "==" } else { "<" };
        write!(
            f,
            "{:<20} {} {:e} {rel} {:e}",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.metric,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub precision: Precision,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["check", "precision", "metric", "threshold", "margin", "status"],
            self.checks.iter().map(|c| {
                vec![
                    c.name.to_string(),
                    self.precision.to_string(),
                    fmt_f64(c.metric),
                    fmt_f64(c.threshold),
                    fmt_f64(c.margin()),
                    if c.passed() { "pass" } else { "fail" }.to_string(),
                ]
            }),
        )
    }
}

/// Grid sizes covered by the equivalence and equivariance checks.
pub const SIZES: [usize; 4] = [4, 7, 16, 28];

fn tol<T: Scalar>(f64_tol: f64, f32_tol: f64) -> f64 {
    match T::PRECISION {
        Precision::F64 => f64_tol,
        Precision::F32 => f32_tol,
    }
}

fn random_odd(rng: &mut CounterRng, max: usize) -> usize {
    2 * rng.below(max.div_ceil(2) as u64) as usize + 1
}

/// Largest `|direct − spectral|` over `trials` random inputs and kernels of
/// random odd extents at one grid size.
pub fn oracle_deviation<T: Scalar>(
    h: usize,
    w: usize,
    c_in: usize,
    trials: usize,
    seed: u64,
    embedding: KernelEmbedding,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut rng = CounterRng::substream(seed, t as u64);
        let kz = random_odd(&mut rng, h);
        let kphi = random_odd(&mut rng, w);
        let c_out = 1 + rng.below(3) as usize;
        let kernel = CclKernel::<T>::random_normal(c_out, c_in, kz, kphi, rng.next_u64())?;
        let f = CylinderMap::<T>::random_normal(c_in, h, w, rng.next_u64())?;
        let direct = CclLayer::new(kernel.clone(), Mode::Direct).forward(&f)?;
        let mut spectral = CclLayer::new(kernel, Mode::Spectral);
        spectral.set_embedding(embedding);
        worst = worst.max(direct.max_abs_diff(&spectral.forward(&f)?)?);
    }
    Ok(worst)
}

fn size_seed(seed: u64, tag: u64, h: usize, w: usize, c: usize) -> u64 {
    CounterRng::substream(seed, (tag << 48) | ((h as u64) << 32) | ((w as u64) << 16) | c as u64).next_u64()
}

fn check_oracle<T: Scalar>(cfg: &VerifyConfig) -> Result<f64> {
    let embedding = match cfg.fault {
        Some(Fault::KernelEmbedding) => KernelEmbedding::Corner,
        None => KernelEmbedding::Centered,
    };
    let mut worst = 0.0f64;
    for h in SIZES {
        for w in SIZES {
            for c in [1, 3] {
                let s = size_seed(cfg.seed, 1, h, w, c);
                worst = worst.max(oracle_deviation::<T>(h, w, c, cfg.trials, s, embedding)?);
            }
        }
    }
    Ok(worst)
}

/// `max |roll(Φf, s) − Φ(roll(f, s))|` over all rolls, both paths.
fn check_equivariance<T: Scalar>(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for h in SIZES {
        for w in SIZES {
            let mut rng = CounterRng::new(size_seed(cfg.seed, 2, h, w, 0));
            let kernel = CclKernel::<T>::random_normal(2, 2, random_odd(&mut rng, h), random_odd(&mut rng, w), rng.next_u64())?;
            let f = CylinderMap::<T>::random_normal(2, h, w, rng.next_u64())?;
            for mode in [Mode::Direct, Mode::Spectral] {
                let mut layer = CclLayer::new(kernel.clone(), mode);
                let out = layer.forward(&f)?;
                for s in 0..w as isize {
                    let d = roll(&out, s).max_abs_diff(&layer.forward(&roll(&f, s))?)?;
                    worst = worst.max(d);
                }
            }
        }
    }
    Ok(worst)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_f64_lossy() * y.to_f64_lossy()).sum()
}

fn norm<T: Scalar>(a: &[T]) -> f64 {
    dot(a, a).sqrt()
}

/// `|⟨Af, g⟩ − ⟨f, Aᵀg⟩| / (‖Af‖·‖g‖)` with `Aᵀ` from the backward pass.
fn check_adjoint<T: Scalar>(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, (h, w)) in [(4, 7), (7, 16), (16, 28), (28, 28)].into_iter().enumerate() {
        let mut rng = CounterRng::substream(cfg.seed ^ 0xad, i as u64);
        let mut kernel = CclKernel::<T>::random_normal(3, 2, 3, 5, rng.next_u64())?;
        kernel.bias_mut().data_mut().iter_mut().for_each(|b| *b = T::zero());
        let f = CylinderMap::<T>::random_normal(2, h, w, rng.next_u64())?;
        let g = CylinderMap::<T>::random_normal(3, h, w, rng.next_u64())?;
        for mode in [Mode::Direct, Mode::Spectral] {
            let mut layer = CclLayer::new(kernel.clone(), mode);
            let af = layer.forward(&f)?;
            let at_g = layer.backward(&f, &g)?.input;
            let lhs = dot(af.data(), g.data());
            let rhs = dot(f.data(), at_g.data());
            worst = worst.max((lhs - rhs).abs() / (norm(af.data()) * norm(g.data())));
        }
    }
    Ok(worst)
}

pub const TRANSFORM_LENGTHS: [usize; 6] = [1, 2, 7, 28, 100, 256];
pub const DCT_LENGTHS: [usize; 5] = [1, 2, 5, 28, 48];

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed);
    (0..n).map(|_| rng.next_normal()).collect()
}

/// `max |DFT(x) − fft(x)|` against a naive `O(N²)` sum in `f64`, and the
/// `ifft∘fft` round trip, as two metrics.
fn check_fft<T: Scalar>(cfg: &VerifyConfig) -> Result<(f64, f64)> {
    let (mut vs_dft, mut round) = (0.0f64, 0.0f64);
    for n in TRANSFORM_LENGTHS {
        let re = random_vec(n, cfg.seed ^ (n as u64) << 8);
        let im = random_vec(n, cfg.seed ^ (n as u64) << 9);
        let plan = SpectralPlan::<T>::new(n)?;
        let x = ComplexBuffer::new(re.iter().map(|&v| T::lit(v)).collect(), im.iter().map(|&v| T::lit(v)).collect())?;
        let y = plan.fft(&x)?;
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for j in 0..n {
                let a = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                sr += re[j] * a.cos() - im[j] * a.sin();
                si += re[j] * a.sin() + im[j] * a.cos();
            }
            vs_dft = vs_dft
                .max((y.re[k].to_f64_lossy() - sr).abs())
                .max((y.im[k].to_f64_lossy() - si).abs());
        }
        let back = plan.ifft(&y)?;
        for j in 0..n {
            round = round
                .max((back.re[j] - x.re[j]).abs().to_f64_lossy())
                .max((back.im[j] - x.im[j]).abs().to_f64_lossy());
        }
    }
    Ok((vs_dft, round))
}

/// `dct2` against direct summation, and `dct3_inverse∘dct2`.
fn check_dct<T: Scalar>(cfg: &VerifyConfig) -> Result<(f64, f64)> {
    let (mut direct, mut round) = (0.0f64, 0.0f64);
    for n in DCT_LENGTHS {
        let x64 = random_vec(n, cfg.seed ^ (n as u64) << 12);
        let x: Vec<T> = x64.iter().map(|&v| T::lit(v)).collect();
        let c = dct2(&x)?;
        for (k, ck) in c.iter().enumerate() {
            let want: f64 = x64
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI / n as f64 * (i as f64 + 0.5) * k as f64).cos())
                .sum();
            direct = direct.max((ck.to_f64_lossy() - want).abs());
        }
        for (a, b) in dct3_inverse(&c)?.iter().zip(&x) {
            round = round.max((*a - *b).abs().to_f64_lossy());
        }
    }
    Ok((direct, round))
}

/// Small network used by the gradient check: two CCL layers, orbit pooling
/// and a dense head.
pub fn gradcheck_spec() -> NetworkSpec {
    let layers = "ccl(3,3,3);relu;ccl(2,3,3);relu;orbitpool(max);fc(12,4);softmax"
        .split(';')
        .map(|l| l.parse().expect("valid layer"))
        .collect();
    NetworkSpec::new("gradcheck", [1, 6, 8], layers)
}

fn check_gradients(cfg: &VerifyConfig) -> Result<f64> {
    let spec = gradcheck_spec();
    let mut worst = 0.0f64;
    for mode in [Mode::Direct, Mode::Spectral] {
        worst = worst.max(network_gradient_error(&spec, mode, cfg.seed, 2)?);
    }
    Ok(worst)
}

/// CCL stack on a full 28×28 grid (no strided pooling), orbit max pooling
/// over φ and a dense head.
pub fn invariant_spec() -> NetworkSpec {
    let layers = "ccl(8,3,3);relu;ccl(8,3,3);relu;ccl(10,3,3);relu;orbitpool(max);fc(280,10);softmax"
        .split(';')
        .map(|l| l.parse().expect("valid layer"))
        .collect();
    NetworkSpec::new("ccl-orbit-28", [1, 28, 28], layers)
}

/// Largest logit change of [`invariant_spec`] over all rolls of a 28-wide
/// input.
pub fn orbit_invariance_deviation<T: Scalar>(seed: u64) -> Result<f64> {
    let spec = invariant_spec();
    let mut net = Network::<T>::build(&spec, seed, Mode::Direct)?;
    let f = CylinderMap::<T>::random_normal(1, 28, 28, seed.wrapping_add(1))?;
    let batch = |m: CylinderMap<T>| m.into_tensor().reshape(&[1, 1, 28, 28]);
    let base: Tensor<T> = net.logits(&batch(f.clone())?)?;
    let mut worst = 0.0f64;
    for s in 0..28 {
        worst = worst.max(net.logits(&batch(roll(&f, s))?)?.max_abs_diff(&base)?);
    }
    Ok(worst)
}

/// Runs every check at precision `T` (the gradient check always runs in `f64`).
/// Thresholds are absolute; in `f32` they allow for outputs of magnitude ~50
/// summed over up to ~2000 taps.
pub fn run_verify<T: Scalar>(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut push = |name, metric, threshold| {
        checks.push(CheckResult {
            name,
            metric,
            threshold,
            exact: false,
        })
    };
    push("oracle_equivalence", check_oracle::<T>(cfg)?, tol::<T>(1e-10, 1e-3));
    push("roll_equivariance", check_equivariance::<T>(cfg)?, tol::<T>(1e-12, 1e-4));
    push("adjoint", check_adjoint::<T>(cfg)?, tol::<T>(1e-12, 1e-5));
    let (vs_dft, fft_round) = check_fft::<T>(cfg)?;
    push("fft_vs_dft", vs_dft, tol::<T>(1e-10, 1e-3));
    push("fft_round_trip", fft_round, tol::<T>(1e-12, 1e-5));
    let (dct_direct, dct_round) = check_dct::<T>(cfg)?;
    push("dct2_vs_direct", dct_direct, tol::<T>(1e-11, 1e-4));
    push("dct_round_trip", dct_round, tol::<T>(1e-12, 1e-5));
    push("gradient_check", check_gradients(cfg)?, 1e-6);
    checks.push(CheckResult {
        name: "orbit_invariance",
        metric: orbit_invariance_deviation::<T>(cfg.seed)?,
        threshold: 0.0,
        exact: true,
    });
    Ok(VerifyReport {
        precision: T::PRECISION,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(fault: Option<Fault>) -> VerifyConfig {
        VerifyConfig {
            seed: 3,
            trials: 2,
            fault,
        }
    }

    #[test]
    fn passes_in_both_precisions() {
        let r = run_verify::<f64>(&quick(None)).unwrap();
        assert!(r.all_passed(), "{:#?}", r.checks);
        let r = run_verify::<f32>(&quick(None)).unwrap();
        assert!(r.all_passed(), "{:#?}", r.checks);
    }

    #[test]
    fn corner_embedding_fails_equivalence_first() {
        let r = run_verify::<f64>(&quick(Some(Fault::KernelEmbedding))).unwrap();
        assert_eq!(r.first_failure().unwrap().name, "oracle_equivalence");
        assert!(r.checks[1..].iter().all(CheckResult::passed));
    }

    #[test]
    fn exact_check_semantics() {
        let c = CheckResult {
            name: "x",
            metric: 0.0,
            threshold: 0.0,
            exact: true,
        };
        assert!(c.passed());
        let c = CheckResult { metric: 1e-30, ..c };
        assert!(!c.passed());
    }
}
