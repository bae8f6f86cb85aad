//! Procedural panoramic images: each class is a pattern family placed at a
//! random azimuth, wrapping across the seam.

use super::LabeledDataset;
use crate::error::{CclError, Result};
use crate::scalar::Scalar;
use crate::tensor::{CounterRng, Tensor};

const NOISE_STD: f64 = 0.05;
const FAMILIES: usize = 5;

fn circ_dist(a: f64, b: f64, w: f64) -> f64 {
    let d = (a - b).rem_euclid(w);
    d.min(w - d)
}

/// Intensity of `class` at `(z, phi)` for a pattern anchored at azimuth `phi0`.
pub(super) fn pattern(class: usize, z: f64, phi: f64, h: f64, w: f64, phi0: f64) -> f64 {
    // classes beyond the base families reuse them at a larger scale
    let scale = 1.0 + 0.5 * (class / FAMILIES) as f64;
    let dphi = circ_dist(phi, phi0, w);
    match class % FAMILIES {
        // single blob at mid height
        0 => {
            let sz = scale * h / 8.0;
            let sp = scale * w / 12.0;
            let dz = z - (h - 1.0) / 2.0;
            (-(dz * dz) / (2.0 * sz * sz) - dphi * dphi / (2.0 * sp * sp)).exp()
        }
        // pair of full-height vertical stripes
        1 => {
            let gap = scale * w / 6.0;
            let a = circ_dist(phi, phi0 + gap / 2.0, w);
            let b = circ_dist(phi, phi0 - gap / 2.0, w);
            if a.min(b) < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        // ring band around the full circumference
        2 => {
            let half = (scale * h / 10.0).max(1.0);
            let centre = h / 4.0;
            if (z - centre).abs() <= half {
                1.0
            } else {
                0.0
            }
        }
        // diagonal streak climbing with azimuth
        3 => {
            let span = scale * w / 4.0;
            let t = (phi - phi0 + span / 2.0).rem_euclid(w);
            if t > span {
                return 0.0;
            }
            let zt = t / span * (h - 1.0);
            if (z - zt).abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        // two blobs stacked at the same azimuth
        _ => {
            let sz = scale * h / 14.0;
            let sp = scale * w / 16.0;
            let g = |zc: f64| {
                let dz = z - zc;
                (-(dz * dz) / (2.0 * sz * sz) - dphi * dphi / (2.0 * sp * sp)).exp()
            };
            g(h * 0.2) + g(h * 0.8)
        }
    }
}

/// `n_per_class * classes` single-channel `h x w` images, labels interleaved
/// (`i % classes`), additive Gaussian noise with std 0.05.
pub fn synth_panoramic<T: Scalar>(
    n_per_class: usize,
    classes: usize,
    h: usize,
    w: usize,
    seed: u64,
) -> Result<LabeledDataset<T>> {
    if classes == 0 || n_per_class == 0 {
        return Err(CclError::arg("synthetic set needs at least one class and sample"));
    }
    if h < 4 || w < 8 {
        return Err(CclError::arg(format!("synthetic images need h >= 4, w >= 8 (got {h}x{w})")));
    }
    let n = n_per_class * classes;
    let mut data = Vec::with_capacity(n * h * w);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let mut rng = CounterRng::substream(seed, i as u64);
        let phi0 = rng.next_f64() * w as f64;
        for z in 0..h {
            for phi in 0..w {
                let v = pattern(class, z as f64, phi as f64, h as f64, w as f64, phi0)
                    + NOISE_STD * rng.next_normal();
                data.push(T::lit(v));
            }
        }
        labels.push(class);
    }
    LabeledDataset::new(Tensor::new(vec![n, 1, h, w], data)?, labels, classes)
}
