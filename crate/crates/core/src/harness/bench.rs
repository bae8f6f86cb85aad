//! Wall-clock comparison of the direct and spectral forward paths over
//! growing azimuthal widths.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use super::report::{fmt_f64, write_csv};
use crate::ccl::{CclKernel, CclLayer, Mode};
use crate::error::{CclError, Result};
use crate::tensor::{CounterRng, CylinderMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Implementation {
    Oracle,
    Spectral,
}

impl Implementation {
    pub fn as_str(self) -> &'static str {
        match self {
            Implementation::Oracle => "oracle",
            Implementation::Spectral => "spectral",
        }
    }

    fn mode(self) -> Mode {
        match self {
            Implementation::Oracle => Mode::Direct,
            Implementation::Spectral => Mode::Spectral,
        }
    }
}

impl fmt::Display for Implementation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Azimuthal kernel extent used at each width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelExtent {
    /// Largest odd extent not exceeding the width.
    Full,
    Fixed(usize),
}

impl KernelExtent {
    fn at(self, n: usize) -> usize {
        match self {
            KernelExtent::Full => n - (1 - n % 2),
            KernelExtent::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Widths `W`, ascending.
    pub sizes: Vec<usize>,
    /// Fixed height of every map.
    pub height: usize,
    pub kz: usize,
    pub kphi: KernelExtent,
    pub c_in: usize,
    pub c_out: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![32, 64, 128, 256, 512],
            height: 4,
            kz: 3,
            kphi: KernelExtent::Full,
            c_in: 2,
            c_out: 2,
            reps: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub implementation: Implementation,
    pub n: usize,
    pub kphi: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub reps: usize,
    pub median_ns: f64,
    pub ns_per_output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub oracle_slope: f64,
    pub spectral_slope: f64,
    /// Smallest width at which the spectral path is faster, if any.
    pub crossover: Option<usize>,
    /// Largest output difference between the two paths over all sizes.
    pub max_deviation: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times one forward pass per repetition, kernel preparation included, after
/// one untimed warm-up. Outputs of both paths are compared at every size.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.reps < 5 {
        return Err(CclError::arg(format!("bench needs at least 5 repetitions (got {})", cfg.reps)));
    }
    if cfg.sizes.len() < 2 || cfg.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CclError::arg("bench sizes must be at least two strictly ascending widths"));
    }
    let mut records = Vec::new();
    let mut max_dev = 0.0f64;
    for &n in &cfg.sizes {
        let kphi = cfg.kphi.at(n);
        let mut rng = CounterRng::substream(cfg.seed, n as u64);
        let kernel = CclKernel::<f64>::random_normal(cfg.c_out, cfg.c_in, cfg.kz, kphi, rng.next_u64())?;
        let f = CylinderMap::<f64>::random_normal(cfg.c_in, cfg.height, n, rng.next_u64())?;
        let mut outputs = Vec::new();
        for imp in [Implementation::Oracle, Implementation::Spectral] {
            let run = || -> Result<CylinderMap<f64>> {
                let mut layer = CclLayer::new(kernel.clone(), imp.mode());
                layer.forward(&f)
            };
            outputs.push(run()?);
            let mut times = Vec::with_capacity(cfg.reps);
            for _ in 0..cfg.reps {
                let t = Instant::now();
                std::hint::black_box(run()?);
                times.push(t.elapsed().as_nanos() as f64);
            }
            let med = median(times);
            records.push(BenchRecord {
                implementation: imp,
                n,
                kphi,
                c_in: cfg.c_in,
                c_out: cfg.c_out,
                reps: cfg.reps,
                median_ns: med,
                ns_per_output: med / (cfg.c_out * cfg.height * n) as f64,
            });
        }
        max_dev = max_dev.max(outputs[0].max_abs_diff(&outputs[1])?);
    }
    let slope = |imp| {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.implementation == imp)
            .map(|r| (r.n as f64, r.median_ns))
            .collect();
        loglog_slope(&pts)
    };
    let crossover = cfg.sizes.iter().copied().find(|&n| {
        let t = |imp| records.iter().find(|r| r.n == n && r.implementation == imp).unwrap().median_ns;
        t(Implementation::Spectral) < t(Implementation::Oracle)
    });
    Ok(BenchReport {
        oracle_slope: slope(Implementation::Oracle),
        spectral_slope: slope(Implementation::Spectral),
        crossover,
        max_deviation: max_dev,
        records,
    })
}

impl BenchReport {
    pub fn write_csv(&self, records: &Path, summary: &Path) -> Result<()> {
        write_csv(
            records,
            &["implementation", "n", "kphi", "c_in", "c_out", "reps", "median_ns", "ns_per_output"],
            self.records.iter().map(|r| {
                vec![
                    r.implementation.to_string(),
                    r.n.to_string(),
                    r.kphi.to_string(),
                    r.c_in.to_string(),
                    r.c_out.to_string(),
                    r.reps.to_string(),
                    fmt_f64(r.median_ns),
                    fmt_f64(r.ns_per_output),
                ]
            }),
        )?;
        write_csv(
            summary,
            &["oracle_slope", "spectral_slope", "crossover_n", "max_deviation"],
            [vec![
                fmt_f64(self.oracle_slope),
                fmt_f64(self.spectral_slope),
                self.crossover.map_or("none".to_string(), |n| n.to_string()),
                fmt_f64(self.max_deviation),
            ]],
        )
    }
}
