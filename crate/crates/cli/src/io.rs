//! PNG/JPEG image plumbing between disk bytes and the core `[0, 1]` rasters.
//!
//! 8-bit channels throughout; the file extension selects the codec on save.
//! Loading scales `v/255`; saving quantizes `round(v*255)`, so a PNG
//! round-trip differs from the original by at most one half quantization
//! step (1/510) per pixel.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage as RgbBuffer};
use uncolorable_core::image::to_grayscale;
use uncolorable_core::mask::EdgeMask;
use uncolorable_core::{GrayscaleImage, RgbImage};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedImage {
    Gray(GrayscaleImage),
    Rgb(RgbImage),
}

impl LoadedImage {
    /// Collapses to grayscale either way (RGB via the luma transform).
    pub fn into_gray(self) -> Result<GrayscaleImage> {
        match self {
            LoadedImage::Gray(g) => Ok(g),
            LoadedImage::Rgb(c) => Ok(to_grayscale(&c)?),
        }
    }
}

pub fn load_image(path: &Path) -> Result<LoadedImage> {
    let img = image::open(path).map_err(|e| CliError::codec(path, e))?;
    Ok(decode_dynamic(&img)?)
}

fn decode_dynamic(img: &DynamicImage) -> Result<LoadedImage> {
    use image::ColorType::*;
    match img.color() {
        L8 | L16 | La8 | La16 => {
            let luma = img.to_luma8();
            let (w, h) = luma.dimensions();
            let data = luma.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
            Ok(LoadedImage::Gray(GrayscaleImage::new(
                h as usize, w as usize, data,
            )?))
        }
        _ => {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            let data = rgb.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
            Ok(LoadedImage::Rgb(RgbImage::new(h as usize, w as usize, data)?))
        }
    }
}

fn byte(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn save_gray(img: &GrayscaleImage, path: &Path) -> Result<()> {
    let buf = GrayImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().iter().map(|&v| byte(v)).collect(),
    )
    .expect("dimensions match data length");
    buf.save(path).map_err(|e| CliError::codec(path, e))
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    let buf = RgbBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().iter().map(|&v| byte(v)).collect(),
    )
    .expect("dimensions match data length");
    buf.save(path).map_err(|e| CliError::codec(path, e))
}

/// Debug export of an edge mask as an 8-bit PNG heat map (0 = black,
/// 1 = white).
pub fn save_mask_heatmap(mask: &EdgeMask, path: &Path) -> Result<()> {
    let buf = GrayImage::from_raw(
        mask.width() as u32,
        mask.height() as u32,
        mask.data().iter().map(|&v| byte(v)).collect(),
    )
    .expect("dimensions match data length");
    buf.save(path).map_err(|e| CliError::codec(path, e))
}

/// Encodes to baseline JPEG at the given quality and decodes again.
/// Grayscale in, grayscale out (single-channel throughout the codec).
pub fn jpeg_roundtrip(x: &GrayscaleImage, quality: u8) -> Result<GrayscaleImage> {
    if !(1..=100).contains(&quality) {
        return Err(CliError::InvalidArgument(format!(
            "jpeg quality must be in 1..=100, got {quality}"
        )));
    }
    let raw: Vec<u8> = x.data().iter().map(|&v| byte(v)).collect();
    let mut bytes = Vec::new();
    let mut enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut bytes, quality);
    enc.encode(
        &raw,
        x.width() as u32,
        x.height() as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| CliError::codec("<memory>", e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| CliError::codec("<memory>", e))?;
    match decode_dynamic(&decoded)? {
        LoadedImage::Gray(g) => Ok(g),
        LoadedImage::Rgb(c) => Ok(to_grayscale(&c)?),
    }
}
