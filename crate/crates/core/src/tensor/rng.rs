//! Portable counter-based random numbers.
//!
//! `CounterRng` is the ChaCha20 stream cipher used as a counter-mode generator
//! (`rand_chacha::ChaCha20Rng`). The 256-bit key is the 64-bit seed written
//! little-endian into the first 8 bytes, remaining key bytes zero; stream id 0,
//! block counter starting at 0. Every 64-bit draw consumes two consecutive
//! 32-bit output words, low word first.
//!
//! Derived variates:
//! - uniform `u = (x >> 11) · 2⁻⁵³` in `[0, 1)`
//! - normal by Box–Muller from two draws: `u1 = ((x1 >> 11) + 1) · 2⁻⁵³` in `(0, 1]`,
//!   `u2` uniform, `n = sqrt(-2 ln u1) · cos(2π u2)`; the sine branch is discarded.
//!
//! Any port that reproduces ChaCha20 and these three formulas reproduces every
//! tensor drawn from a given seed.

use rand_chacha::ChaCha20Rng;
use rand_core::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub struct CounterRng {
    inner: ChaCha20Rng,
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        CounterRng {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    /// Derives an independent generator for substream `stream` of `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = Self::new(seed);
        rng.inner.set_stream(stream);
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `[0, n)` by rejection, `n ≥ 1`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_and_streams_differ() {
        let a: Vec<u64> = (0..4).map({
            let mut r = CounterRng::new(1);
            move |_| r.next_u64()
        }).collect();
        let mut r2 = CounterRng::new(2);
        let mut s1 = CounterRng::substream(1, 1);
        assert_ne!(a[0], r2.next_u64());
        assert_ne!(a[0], s1.next_u64());
        let mut again = CounterRng::new(1);
        assert_eq!(a[0], again.next_u64());
    }

    #[test]
    fn uniform_range_and_below() {
        let mut r = CounterRng::new(7);
        for _ in 0..1000 {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(28) < 28);
        }
    }
}
