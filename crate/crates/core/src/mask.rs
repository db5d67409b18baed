//! Continuous Laplacian edge mask.
//!
//! `M = |x * K|` with `K = [0, 1, 0; 1, -4, 1; 0, 1, 0]`, normalized so the
//! maximum response is 1. The mask multiplies gradient steps so perturbations
//! concentrate on edges, where contrast masking hides them from human vision.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::GrayscaleImage;

/// Per-pixel weights in `[0, 1]` matching the source image's dimensions.
/// A constant source yields an all-zero mask; any non-constant source has at
/// least one weight equal to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl EdgeMask {
    /// All-ones mask; used when masking is disabled so the same attack loop
    /// covers the unmasked baselines.
    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Absolute Laplacian response with replicate (edge-clamp) padding, before
/// normalization. Exposed at raster level so small probes can be checked
/// directly.
pub fn laplacian_magnitude(data: &[f32], height: usize, width: usize) -> Vec<f32> {
    assert_eq!(data.len(), height * width);
    let mut out = vec![0.0f32; height * width];
    let at = |y: isize, x: isize| -> f32 {
        let yc = y.clamp(0, height as isize - 1) as usize;
        let xc = x.clamp(0, width as isize - 1) as usize;
        data[yc * width + xc]
    };
    for y in 0..height as isize {
        for x in 0..width as isize {
            let lap = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1)
                - 4.0 * at(y, x);
            out[y as usize * width + x as usize] = lap.abs();
        }
    }
    out
}

/// Laplacian edge mask of `x`, normalized by its global maximum (all zeros if
/// the response is identically zero).
pub fn laplacian_mask(x: &GrayscaleImage) -> EdgeMask {
    let mut data = laplacian_magnitude(x.data(), x.height(), x.width());
    let max = data.iter().fold(0.0f32, |m, &v| m.max(v));
    if max > 0.0 {
        for v in &mut data {
            *v /= max;
        }
    }
    EdgeMask {
        height: x.height(),
        width: x.width(),
        data,
    }
}

/// Element-wise product of a gradient raster with the mask. Zeros in the mask
/// force a zero update at those pixels.
pub fn apply_mask(gradient: &mut [f32], mask: &EdgeMask) -> Result<()> {
    if gradient.len() != mask.data.len() {
        return Err(Error::DimensionMismatch {
            expected: (mask.height, mask.width),
            got: (gradient.len() / mask.width.max(1), mask.width),
        });
    }
    for (g, &m) in gradient.iter_mut().zip(&mask.data) {
        *g *= m;
    }
    Ok(())
}
