//! Core algorithms for *uncolorable examples*: grayscale images carrying an
//! imperceptible, norm-bounded perturbation that steers colorization models
//! toward near-grayscale output.
//!
//! The crate is `no_std` + `alloc` and has no I/O. It provides:
//!
//! - [`image`]: canonical `[0, 1]` float rasters ([`GrayscaleImage`],
//!   [`RgbImage`], [`Perturbation`]) with bilinear resizing,
//! - [`metrics`]: colorfulness (Hasler–Süsstrunk), PSNR and SSIM,
//! - [`mask`]: the normalized Laplacian edge mask that concentrates
//!   perturbations in high-frequency regions,
//! - [`transforms`]: block-wise structure-invariant augmentations and random
//!   resized cropping,
//! - [`colorizer`]: small differentiable colorization networks with exact
//!   reverse-mode gradients, plus their training loop,
//! - [`attack`]: the momentum-sign optimization loop producing the
//!   perturbations, covering the `random`, `na`, `na-mask` and `pachroma`
//!   attack presets.
//!
//! File formats, codecs and the evaluation harness live in the companion
//! `uncolorable` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attack;
pub mod colorizer;
pub mod error;
pub mod image;
pub mod mask;
pub mod math;
pub mod metrics;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{GrayscaleImage, Perturbation, RgbImage};
pub use mask::EdgeMask;

/// Re-exported so downstream crates share the exact RNG used for all seeded
/// sampling in this crate.
pub use rand_chacha::ChaCha8Rng;
