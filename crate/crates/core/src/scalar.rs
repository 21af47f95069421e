//! Floating-point element types accepted by the metrics and the stream format.
//!
//! Inputs may arrive as `f32` or `f64`; every accumulation widens to `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Encoded width in bytes.
    const WIDTH: usize;
    /// Absolute tolerance on `|Σp − 1|` when validating a distribution of this type.
    const NORM_TOLERANCE: f64;

    fn widen(self) -> f64;
    fn narrow(v: f64) -> Self;
    fn write_le(self, out: &mut [u8]);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const WIDTH: usize = 4;
    // Σ of V rounded binary32 masses carries at most ~2^-24 relative error.
    const NORM_TOLERANCE: f64 = 1e-6;

    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn write_le(self, out: &mut [u8]) {
        out[..4].copy_from_slice(&self.to_le_bytes());
    }
    #[inline]
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Scalar for f64 {
    const WIDTH: usize = 8;
    const NORM_TOLERANCE: f64 = 1e-9;

    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v
    }
    #[inline]
    fn write_le(self, out: &mut [u8]) {
        out[..8].copy_from_slice(&self.to_le_bytes());
    }
    #[inline]
    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(b)
    }
}

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise (tree) summation of `f(0) + … + f(n-1)` in `f64`.
pub fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, n, &f)
}

/// Pairwise summation of two series at once.
pub fn pairwise_sum2<F: Fn(usize) -> (f64, f64)>(n: usize, f: F) -> (f64, f64) {
    fn go<F: Fn(usize) -> (f64, f64)>(lo: usize, hi: usize, f: &F) -> (f64, f64) {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut acc = (0.0, 0.0);
            for i in lo..hi {
                let (a, b) = f(i);
                acc.0 += a;
                acc.1 += b;
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            let l = go(lo, mid, f);
            let r = go(mid, hi, f);
            (l.0 + r.0, l.1 + r.1)
        }
    }
    go(0, n, &f)
}
