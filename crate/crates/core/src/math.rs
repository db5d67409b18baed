//! Scalar abstraction over `f32`/`f64` plus the libm-backed float helpers the
//! crate needs under `no_std`.
//!
//! The colorizer stack and the colorfulness gradient are generic over
//! [`Scalar`] so the same code path can run in `f64` when used as a
//! finite-difference oracle, while production attacks stay in `f32`.

use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + core::fmt::Debug
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;
    fn from_usize(v: usize) -> Self;
    fn to_f64(self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn abs(self) -> Self;
    fn maxs(self, other: Self) -> Self;
    fn mins(self, other: Self) -> Self;
    fn is_finite(self) -> bool;

    fn clamp01(self) -> Self {
        self.maxs(Self::ZERO).mins(Self::ONE)
    }
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f32(v: f32) -> Self {
        v
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn from_usize(v: usize) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn sqrt(self) -> Self {
        libm::sqrtf(self)
    }
    fn exp(self) -> Self {
        libm::expf(self)
    }
    fn abs(self) -> Self {
        libm::fabsf(self)
    }
    fn maxs(self, other: Self) -> Self {
        self.max(other)
    }
    fn mins(self, other: Self) -> Self {
        self.min(other)
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_usize(v: usize) -> Self {
        v as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn abs(self) -> Self {
        libm::fabs(self)
    }
    fn maxs(self, other: Self) -> Self {
        self.max(other)
    }
    fn mins(self, other: Self) -> Self {
        self.min(other)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// `sign` with the convention `sign(0) = 0`, so zero-gradient pixels stay put.
pub fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sqrtf(v: f32) -> f32 {
    libm::sqrtf(v)
}

pub fn cosf(v: f32) -> f32 {
    libm::cosf(v)
}

pub fn log10(v: f64) -> f64 {
    libm::log10(v)
}

pub fn roundf(v: f32) -> f32 {
    libm::roundf(v)
}

pub fn floorf(v: f32) -> f32 {
    libm::floorf(v)
}

/// SplitMix64 step, used to derive independent per-iteration / per-copy RNG
/// seeds from one user-facing seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
