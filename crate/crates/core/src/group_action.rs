//! The discrete roto-translation group `Z_W × Z` acting on cylinder maps.

use std::f64::consts::PI;

use crate::scalar::Scalar;
use crate::tensor::CylinderMap;

/// Group element `(s, ν)`: roll by `s` columns around the axis, shift by `ν`
/// rows along it. `s` is kept reduced modulo `width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RotoTranslation {
    roll: usize,
    shift: isize,
    width: usize,
}

impl RotoTranslation {
    /// # Panics
    /// If `width` is zero.
    pub fn new(roll: isize, shift: isize, width: usize) -> Self {
        assert!(width > 0, "cylinder width must be positive");
        RotoTranslation {
            roll: roll.rem_euclid(width as isize) as usize,
            shift,
            width,
        }
    }

    pub fn identity(width: usize) -> Self {
        Self::new(0, 0, width)
    }

    pub fn rotation(roll: isize, width: usize) -> Self {
        Self::new(roll, 0, width)
    }

    pub fn translation(shift: isize, width: usize) -> Self {
        Self::new(0, shift, width)
    }

    /// Quantizes a rotation angle `psi` (radians) to the nearest column:
    /// `s = round(ψ·W/2π) mod W`.
    pub fn from_angle(psi: f64, shift: isize, width: usize) -> Self {
        let s = (psi * width as f64 / (2.0 * PI)).round() as isize;
        Self::new(s, shift, width)
    }

    pub fn roll(&self) -> usize {
        self.roll
    }

    pub fn shift(&self) -> isize {
        self.shift
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_rotation(&self) -> bool {
        self.shift == 0
    }

    /// `(s₁+s₂ mod W, ν₁+ν₂)`.
    ///
    /// # Panics
    /// If the two elements act on different widths.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.width, other.width, "composing elements of different widths");
        Self::new(
            (self.roll + other.roll) as isize,
            self.shift + other.shift,
            self.width,
        )
    }

    pub fn inverse(&self) -> Self {
        Self::new(-(self.roll as isize), -self.shift, self.width)
    }
}

/// `out[c, z, φ] = f[c, z − ν, (φ − s) mod W]`, zero where `z − ν` leaves
/// `[0, H)`.
///
/// # Panics
/// If `xi` was built for a different width than `f`.
pub fn act<T: Scalar>(xi: &RotoTranslation, f: &CylinderMap<T>) -> CylinderMap<T> {
    let (c, h, w) = (f.channels(), f.height(), f.width());
    assert_eq!(xi.width, w, "group element width does not match the map");
    let mut out = CylinderMap::zeros(c, h, w).expect("non-empty map");
    let s = xi.roll;
    let src = f.data();
    let dst = out.data_mut();
    for ch in 0..c {
        for z in 0..h {
            let zs = z as isize - xi.shift;
            if zs < 0 || zs >= h as isize {
                continue;
            }
            let src_row = &src[(ch * h + zs as usize) * w..][..w];
            let dst_row = &mut dst[(ch * h + z) * w..][..w];
            // dst[φ] = src[φ - s]  ⇔  dst[s..] = src[..w-s], dst[..s] = src[w-s..]
            dst_row[s..].copy_from_slice(&src_row[..w - s]);
            dst_row[..s].copy_from_slice(&src_row[w - s..]);
        }
    }
    out
}

/// Pure column roll by `s`.
pub fn roll<T: Scalar>(f: &CylinderMap<T>, s: isize) -> CylinderMap<T> {
    act(&RotoTranslation::rotation(s, f.width()), f)
}
