//! Canonical image representations shared by every other module.
//!
//! Pixels are `f32` in `[0, 1]` everywhere inside the toolkit; 8-bit values
//! exist only at file boundaries. Rasters are row-major; RGB data is
//! interleaved `r, g, b` per pixel.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Minimum height/width for grayscale pipeline images (SSIM windows and 3x3
/// block splitting need some room).
pub const MIN_SIDE: usize = 8;

/// BT.601 luma weights. The colorization literature this toolkit follows uses
/// them for grayscale conversion.
pub const LUMA_R: f32 = 0.299;
pub const LUMA_G: f32 = 0.587;
pub const LUMA_B: f32 = 0.114;

/// A single-channel image with luminance values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// A three-channel image with values in `[0, 1]`, interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// A signed per-pixel offset `δ` such that `clip(x + δ, 0, 1)` is the stored
/// adversarial image exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

fn check_range(data: &[f32]) -> Result<()> {
    if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::InvalidArgument("pixel values must lie in [0, 1]"));
    }
    Ok(())
}

impl GrayscaleImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(Error::InvalidArgument("image sides must be at least 8"));
        }
        if data.len() != height * width {
            return Err(Error::InvalidArgument("data length must equal h*w"));
        }
        check_range(&data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds an image from raw data, clamping each value into `[0, 1]`.
    pub fn from_raw_clamped(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let clamped = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(height, width, clamped)
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
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

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear resize (half-pixel-center sampling, not corner-aligned).
    pub fn resize(&self, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h < MIN_SIDE || out_w < MIN_SIDE {
            return Err(Error::InvalidArgument("resize target must be at least 8x8"));
        }
        let data = resize_raster(&self.data, self.height, self.width, 1, out_h, out_w);
        Self::from_raw_clamped(out_h, out_w, data)
    }

    /// RGB copy with `R = G = B = v`; its colorfulness is exactly zero.
    pub fn replicate_rgb(&self) -> RgbImage {
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for &v in &self.data {
            data.extend_from_slice(&[v, v, v]);
        }
        RgbImage {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Quantizes through the 8-bit grid, i.e. the value that survives a PNG
    /// round trip: `round(v*255)/255`.
    pub fn quantized(&self) -> Self {
        let data = self.data.iter().map(|&v| quantize8(v)).collect();
        Self {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("image sides must be nonzero"));
        }
        if data.len() != height * width * 3 {
            return Err(Error::InvalidArgument("data length must equal h*w*3"));
        }
        check_range(&data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_raw_clamped(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let clamped = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(height, width, clamped)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Interleaved `r, g, b` values.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> (f32, f32, f32) {
        let i = (y * self.width + x) * 3;
        (self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn resize(&self, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h == 0 || out_w == 0 {
            return Err(Error::InvalidArgument("resize target must be nonzero"));
        }
        let data = resize_raster(&self.data, self.height, self.width, 3, out_h, out_w);
        Self::from_raw_clamped(out_h, out_w, data)
    }
}

impl Perturbation {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidArgument("data length must equal h*w"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
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

    pub fn linf_norm(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, &v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f32 {
        math::sqrtf(self.data.iter().map(|&v| v * v).sum())
    }
}

/// BT.601 luma of one RGB triple.
pub fn luma(r: f32, g: f32, b: f32) -> f32 {
    LUMA_R * r + LUMA_G * g + LUMA_B * b
}

/// Converts to grayscale with BT.601 weights. A pure-gray triple `(v, v, v)`
/// maps to exactly `v` (the weights sum to 1).
pub fn to_grayscale(img: &RgbImage) -> Result<GrayscaleImage> {
    let mut data = Vec::with_capacity(img.height * img.width);
    for px in img.data.chunks_exact(3) {
        data.push(luma(px[0], px[1], px[2]));
    }
    GrayscaleImage::from_raw_clamped(img.height, img.width, data)
}

/// One 8-bit quantization step: the value a pixel takes after a lossless save
/// and reload. `|quantize8(v) - v| <= 1/510`.
pub fn quantize8(v: f32) -> f32 {
    math::roundf(v.clamp(0.0, 1.0) * 255.0) / 255.0
}

/// Bilinear resampling of an interleaved multi-channel raster with
/// half-pixel-center (corner-aligned = false) coordinates. Resizing to the
/// source dimensions is exactly the identity.
pub(crate) fn resize_raster(
    data: &[f32],
    in_h: usize,
    in_w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f32> {
    let mut out = vec![0.0f32; out_h * out_w * channels];
    let scale_y = in_h as f32 / out_h as f32;
    let scale_x = in_w as f32 / out_w as f32;
    for oy in 0..out_h {
        let sy = ((oy as f32 + 0.5) * scale_y - 0.5).clamp(0.0, (in_h - 1) as f32);
        let y0 = math::floorf(sy) as usize;
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f32;
        for ox in 0..out_w {
            let sx = ((ox as f32 + 0.5) * scale_x - 0.5).clamp(0.0, (in_w - 1) as f32);
            let x0 = math::floorf(sx) as usize;
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f32;
            for c in 0..channels {
                let v00 = data[(y0 * in_w + x0) * channels + c];
                let v01 = data[(y0 * in_w + x1) * channels + c];
                let v10 = data[(y1 * in_w + x0) * channels + c];
                let v11 = data[(y1 * in_w + x1) * channels + c];
                let top = v00 + (v01 - v00) * fx;
                let bot = v10 + (v11 - v10) * fx;
                out[(oy * out_w + ox) * channels + c] = top + (bot - top) * fy;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_rejects_out_of_range() {
        assert!(GrayscaleImage::new(8, 8, vec![1.5; 64]).is_err());
        assert!(GrayscaleImage::new(8, 8, vec![-0.1; 64]).is_err());
        assert!(GrayscaleImage::new(8, 8, vec![0.5; 64]).is_ok());
    }

    #[test]
    fn grayscale_rejects_undersized() {
        assert!(GrayscaleImage::new(4, 8, vec![0.0; 32]).is_err());
    }

    #[test]
    fn luma_endpoints() {
        assert_eq!(luma(1.0, 1.0, 1.0), 1.0);
        assert_eq!(luma(0.0, 0.0, 0.0), 0.0);
        assert!((luma(1.0, 0.0, 0.0) - 0.299).abs() < 1e-7);
    }

    #[test]
    fn to_grayscale_preserves_gray_triples() {
        for v in [0.0f32, 0.25, 0.5, 128.0 / 255.0, 1.0] {
            let rgb = RgbImage::new(8, 8, vec![v; 8 * 8 * 3]).unwrap();
            let gray = to_grayscale(&rgb).unwrap();
            assert!(gray.data().iter().all(|&g| g == v), "v={v}");
        }
    }

    #[test]
    fn quantize_round_trip_error_bound() {
        for i in 0..=1000 {
            let v = i as f32 / 1000.0;
            assert!((quantize8(v) - v).abs() <= 1.0 / 510.0 + 1e-7);
        }
        assert_eq!(quantize8(1.0), 1.0);
        assert_eq!(quantize8(0.0), 0.0);
        assert!((quantize8(0.5) - 128.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn resize_identity_is_exact() {
        let data: Vec<f32> = (0..64).map(|i| i as f32 / 63.0).collect();
        let img = GrayscaleImage::new(8, 8, data).unwrap();
        let same = img.resize(8, 8).unwrap();
        assert_eq!(img, same);
    }

    #[test]
    fn resize_preserves_constants() {
        let img = GrayscaleImage::constant(8, 8, 0.7).unwrap();
        let up = img.resize(13, 29).unwrap();
        assert!(up.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn resize_row_linear_interpolation() {
        // A single row [0, 1] upsampled to 4 columns: half-pixel-center
        // sampling puts output centers at source x = -0.25, 0.25, 0.75, 1.25,
        // which clamp/interpolate to 0, 0.25, 0.75, 1.
        let row = [0.0f32, 1.0];
        let out = resize_raster(&row, 1, 2, 1, 1, 4);
        let expect = [0.0, 0.25, 0.75, 1.0];
        for (o, e) in out.iter().zip(expect) {
            assert!((o - e).abs() < 1e-6, "{out:?}");
        }
    }

    #[test]
    fn replicate_rgb_is_gray() {
        let img = GrayscaleImage::constant(8, 8, 0.3).unwrap();
        let rgb = img.replicate_rgb();
        for y in 0..8 {
            for x in 0..8 {
                let (r, g, b) = rgb.pixel(y, x);
                assert_eq!(r, g);
                assert_eq!(g, b);
            }
        }
    }
}
