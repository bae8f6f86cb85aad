//! Discretization-error sweep: how far stacks of randomly initialized CCL
//! layers drift from exact roll equivariance in floating point.

use std::path::Path;

use super::report::{fmt_f64, write_csv};
use crate::ccl::{CclKernel, CclLayer, Mode};
use crate::error::{CclError, Result};
use crate::group_action::roll;
use crate::par;
use crate::scalar::{Precision, Scalar};
use crate::tensor::{CounterRng, CylinderMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepConfig {
    pub depths: Vec<usize>,
    /// Square grids, `H = W = resolution`.
    pub resolutions: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub mode: Mode,
    pub channels: usize,
    pub kernel: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            depths: vec![1, 3, 5],
            resolutions: vec![16, 28, 64],
            samples: 100,
            seed: 7,
            mode: Mode::Spectral,
            channels: 10,
            kernel: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceRecord {
    pub depth: usize,
    pub resolution: usize,
    pub precision: Precision,
    pub mode: Mode,
    pub samples: usize,
    pub eps_mean: f64,
    pub eps_std: f64,
    pub eps_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceSample {
    pub depth: usize,
    pub resolution: usize,
    pub sample: usize,
    pub roll: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquivarianceReport {
    pub records: Vec<EquivarianceRecord>,
    pub samples: Vec<EquivarianceSample>,
}

/// Population standard deviation, accumulated in `f64`.
pub fn population_std(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().into_iter().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let var = values.into_iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// A stack of `depth` CCL layers with ReLU between consecutive layers.
#[derive(Debug, Clone)]
pub struct CclStack<T: Scalar> {
    layers: Vec<CclLayer<T>>,
}

impl<T: Scalar> CclStack<T> {
    /// Glorot-initialized `channels → channels` layers; layer `l` seeds from
    /// substream `l` of `seed`.
    pub fn random(depth: usize, channels: usize, kernel: usize, h: usize, w: usize, mode: Mode, seed: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let s = CounterRng::substream(seed, l as u64).next_u64();
            let mut layer = CclLayer::new(CclKernel::glorot(channels, channels, kernel, kernel, s)?, mode);
            layer.prepare(h, w)?;
            layers.push(layer);
        }
        Ok(CclStack { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, f: &CylinderMap<T>) -> Result<CylinderMap<T>> {
        let mut cur = f.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            cur = layer.forward_prepared(&cur)?;
            if l + 1 < self.layers.len() {
                cur.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
        }
        Ok(cur)
    }

    /// `std(roll(Φ(f), s) − Φ(roll(f, s))) / std(Φ(f))`.
    pub fn epsilon(&self, f: &CylinderMap<T>, s: isize) -> Result<f64> {
        let out = self.forward(f)?;
        let lhs = roll(&out, s);
        let rhs = self.forward(&roll(f, s))?;
        let resid = lhs
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(a, b)| a.to_f64_lossy() - b.to_f64_lossy());
        let denom = population_std(out.data().iter().map(|v| v.to_f64_lossy()));
        if denom == 0.0 {
            return Err(CclError::arg("network output is constant; epsilon undefined"));
        }
        Ok(population_std(resid.collect::<Vec<_>>()) / denom)
    }
}

fn config_seed(seed: u64, depth: usize, res: usize) -> u64 {
    CounterRng::substream(seed, ((depth as u64) << 32) | res as u64).next_u64()
}

/// For every `(depth, resolution)` pair: `samples` random normal inputs
/// `[channels, res, res]`, each rolled by a nonzero column count drawn
/// uniformly from `[1, res)`.
pub fn run_discretization_sweep<T: Scalar>(cfg: &SweepConfig) -> Result<EquivarianceReport> {
    if cfg.samples == 0 {
        return Err(CclError::arg("sweep needs at least one sample"));
    }
    if cfg.channels == 0 {
        return Err(CclError::arg("sweep needs at least one channel"));
    }
    let mut report = EquivarianceReport::default();
    for &depth in &cfg.depths {
        for &res in &cfg.resolutions {
            if res < 2 || res < cfg.kernel {
                return Err(CclError::arg(format!(
                    "resolution {res} too small for a {0}x{0} kernel",
                    cfg.kernel
                )));
            }
            let cs = config_seed(cfg.seed, depth, res);
            let stack = CclStack::<T>::random(depth, cfg.channels, cfg.kernel, res, res, cfg.mode, cs)?;
            let per = par::map_indexed(cfg.samples, |i| -> Result<(usize, f64)> {
                let mut rng = CounterRng::substream(cs, (1 << 40) + i as u64);
                let f = CylinderMap::<T>::random_normal(cfg.channels, res, res, rng.next_u64())?;
                let s = 1 + rng.below(res as u64 - 1) as usize;
                Ok((s, stack.epsilon(&f, s as isize)?))
            });
            let per = per.into_iter().collect::<Result<Vec<_>>>()?;
            let eps: Vec<f64> = per.iter().map(|p| p.1).collect();
            report.records.push(EquivarianceRecord {
                depth,
                resolution: res,
                precision: T::PRECISION,
                mode: cfg.mode,
                samples: cfg.samples,
                eps_mean: eps.iter().sum::<f64>() / eps.len() as f64,
                eps_std: population_std(eps.iter().copied()),
                eps_max: eps.iter().copied().fold(0.0, f64::max),
            });
            report
                .samples
                .extend(per.into_iter().enumerate().map(|(i, (s, e))| EquivarianceSample {
                    depth,
                    resolution: res,
                    sample: i,
                    roll: s,
                    eps: e,
                }));
        }
    }
    Ok(report)
}

impl EquivarianceReport {
    pub const SUMMARY_HEADER: &'static [&'static str] = &[
        "depth",
        "resolution",
        "precision",
        "mode",
        "n_samples",
        "eps_mean",
        "eps_std",
        "eps_max",
    ];
    pub const SAMPLES_HEADER: &'static [&'static str] = &["depth", "resolution", "sample", "roll", "eps"];

    pub fn write_csv(&self, summary: &Path, samples: &Path) -> Result<()> {
        write_csv(
            summary,
            Self::SUMMARY_HEADER,
            self.records.iter().map(|r| {
                vec![
                    r.depth.to_string(),
                    r.resolution.to_string(),
                    r.precision.to_string(),
                    r.mode.as_str().to_string(),
                    r.samples.to_string(),
                    fmt_f64(r.eps_mean),
                    fmt_f64(r.eps_std),
                    fmt_f64(r.eps_max),
                ]
            }),
        )?;
        write_csv(
            samples,
            Self::SAMPLES_HEADER,
            self.samples.iter().map(|s| {
                vec![
                    s.depth.to_string(),
                    s.resolution.to_string(),
                    s.sample.to_string(),
                    s.roll.to_string(),
                    fmt_f64(s.eps),
                ]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(depths: Vec<usize>, mode: Mode) -> SweepConfig {
        SweepConfig {
            depths,
            resolutions: vec![8, 12],
            samples: 6,
            seed: 3,
            mode,
            channels: 3,
            kernel: 3,
        }
    }

    #[test]
    fn population_std_matches_hand_value() {
        assert!((population_std([1.0, 2.0, 3.0, 4.0]) - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(population_std(Vec::<f64>::new()), 0.0);
    }

    #[test]
    fn zero_depth_is_exact() {
        let r = run_discretization_sweep::<f32>(&small(vec![0], Mode::Spectral)).unwrap();
        assert!(r.records.iter().all(|rec| rec.eps_max == 0.0));
    }

    #[test]
    fn single_layer_f64_below_1e12() {
        for mode in [Mode::Direct, Mode::Spectral] {
            let r = run_discretization_sweep::<f64>(&small(vec![1], mode)).unwrap();
            for rec in &r.records {
                assert!(rec.eps_max < 1e-12, "{rec:?}");
            }
        }
    }

    #[test]
    fn direct_mode_is_bit_exact_in_f32() {
        let r = run_discretization_sweep::<f32>(&small(vec![1, 3], Mode::Direct)).unwrap();
        assert!(r.samples.iter().all(|s| s.eps == 0.0));
    }

    #[test]
    fn spectral_f32_error_is_float_sized() {
        let r = run_discretization_sweep::<f32>(&small(vec![3], Mode::Spectral)).unwrap();
        for rec in &r.records {
            assert!(rec.eps_mean > 0.0 && rec.eps_mean < 1e-5, "{rec:?}");
        }
    }

    #[test]
    fn report_shape_and_determinism() {
        let cfg = small(vec![1, 2], Mode::Spectral);
        let a = run_discretization_sweep::<f64>(&cfg).unwrap();
        assert_eq!(a.records.len(), 4);
        assert_eq!(a.samples.len(), 24);
        assert!(a.samples.iter().all(|s| s.roll >= 1 && s.roll < s.resolution && s.eps >= 0.0));
        assert_eq!(a, run_discretization_sweep::<f64>(&cfg).unwrap());
    }

    #[test]
    fn roll_sign_does_not_matter_in_exact_mode() {
        let stack = CclStack::<f64>::random(2, 2, 3, 6, 10, Mode::Direct, 1).unwrap();
        let f = CylinderMap::<f64>::random_normal(2, 6, 10, 2).unwrap();
        for s in 1..10 {
            assert_eq!(stack.epsilon(&f, s).unwrap(), stack.epsilon(&f, s - 10).unwrap());
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small(vec![1], Mode::Direct);
        cfg.samples = 0;
        assert!(run_discretization_sweep::<f64>(&cfg).is_err());
        let mut cfg = small(vec![1], Mode::Direct);
        cfg.resolutions = vec![2];
        assert!(run_discretization_sweep::<f64>(&cfg).is_err());
    }
}
