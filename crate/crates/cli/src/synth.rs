//! Deterministic synthetic color corpus whose chroma is keyed to a
//! low-amplitude high-frequency luma carrier.
//!
//! Each image is a smooth random luma field; roughly half of it (a smooth
//! random region) additionally carries a faint diagonal oscillation. The
//! color target is chromatic exactly where the carrier is present and gray
//! elsewhere, with opponent-channel offsets that cancel under the luma
//! transform, so `to_grayscale(color) == gray` up to float rounding. A
//! colorizer trained on this corpus must detect local carrier energy to
//! decide where to paint color — a deliberately fragile cue: the carrier
//! amplitude sits below the standard 16/255 perturbation budget, which is
//! what makes the images protectable at all. Flat constant rectangles give
//! regions where the Laplacian mask is exactly zero.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};
use uncolorable_core::image::{LUMA_B, LUMA_G, LUMA_R};
use uncolorable_core::math::mix_seed;
use uncolorable_core::{ChaCha8Rng, GrayscaleImage, RgbImage};

use crate::error::{CliError, Result};
use crate::io::save_rgb;

/// Peak luma amplitude of the chroma carrier; below 16/255 by design.
pub const CARRIER_AMP: f32 = 0.045;
/// Carrier period in pixels along the x+y diagonal.
pub const CARRIER_PERIOD: f32 = 8.0;

/// Gray→color map at chroma strength `s` in [0, 1]. Offsets scale with
/// `t = 4v(1-v)·s`, peaking at mid-gray, and cancel under the luma
/// transform; nothing clips for v in [0, 0.9].
pub fn palette(v: f32, s: f32) -> (f32, f32, f32) {
    let t = 4.0 * v * (1.0 - v) * s;
    if t == 0.0 {
        return (v, v, v);
    }
    let r = (v + 0.30 * t).clamp(0.0, 1.0);
    let b = (v - 0.20 * t).clamp(0.0, 1.0);
    let g = ((v - LUMA_R * r - LUMA_B * b) / LUMA_G).clamp(0.0, 1.0);
    (r, g, b)
}

fn cosine_field(size: usize, rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Vec<f32> {
    let waves: Vec<(f32, f32, f32, f32)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-3.0f32..3.0),
                rng.gen_range(-3.0f32..3.0),
                rng.gen_range(0.0f32..core::f32::consts::TAU),
                rng.gen_range(0.5f32..1.0),
            )
        })
        .collect();
    let inv = core::f32::consts::TAU / size as f32;
    let mut data = vec![0.0f32; size * size];
    for y in 0..size {
        for x in 0..size {
            let mut v = 0.0;
            for &(fx, fy, phase, amp) in &waves {
                v += amp * (inv * (fx * x as f32 + fy * y as f32) + phase).cos();
            }
            data[y * size + x] = v;
        }
    }
    let min = data.iter().cloned().fold(f32::INFINITY, f32::min);
    let max = data.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let span = (max - min).max(1e-6);
    for v in &mut data {
        *v = lo + (hi - lo) * (*v - min) / span;
    }
    data
}

/// One corpus image: the grayscale input (smooth field + masked carrier)
/// and the chroma-strength field the color target is built from.
pub struct SynthSample {
    pub gray: GrayscaleImage,
    pub strength: Vec<f32>,
}

pub fn sample(size: usize, seed: u64) -> SynthSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = cosine_field(size, &mut rng, 0.15, 0.85);
    // Smooth region field thresholded into a soft chroma mask covering
    // roughly half the image.
    let region = cosine_field(size, &mut rng, 0.0, 1.0);
    let mut strength: Vec<f32> = region
        .iter()
        .map(|&w| ((w - 0.45) / 0.10).clamp(0.0, 1.0))
        .collect();

    let phase = rng.gen_range(0.0f32..core::f32::consts::TAU);
    let k = core::f32::consts::TAU / CARRIER_PERIOD;
    let mut data = vec![0.0f32; size * size];
    for y in 0..size {
        for x in 0..size {
            let i = y * size + x;
            let carrier = (k * (x + y) as f32 + phase).sin();
            data[i] = (base[i] + CARRIER_AMP * strength[i] * carrier).clamp(0.0, 1.0);
        }
    }

    // Flat constant rectangles: exact mask zeros, no carrier, no chroma.
    for _ in 0..rng.gen_range(1..=2usize) {
        let rh = rng.gen_range(size / 6..size / 4);
        let rw = rng.gen_range(size / 6..size / 4);
        let y0 = rng.gen_range(0..size - rh);
        let x0 = rng.gen_range(0..size - rw);
        let val = rng.gen_range(0.15f32..0.85);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                data[y * size + x] = val;
                strength[y * size + x] = 0.0;
            }
        }
    }
    SynthSample {
        gray: GrayscaleImage::new(size, size, data).expect("synthetic field is well-formed"),
        strength,
    }
}

pub fn colorize(gray: &GrayscaleImage, strength: &[f32]) -> RgbImage {
    let data = gray
        .data()
        .iter()
        .zip(strength)
        .flat_map(|(&v, &s)| {
            let (r, g, b) = palette(v, s);
            [r, g, b]
        })
        .collect();
    RgbImage::new(gray.height(), gray.width(), data).expect("palette stays in range")
}

pub fn generate_corpus(n: usize, size: usize, seed: u64) -> Vec<(GrayscaleImage, RgbImage)> {
    (0..n)
        .map(|i| {
            let s = sample(size, mix_seed(seed, i as u64));
            let color = colorize(&s.gray, &s.strength);
            (s.gray, color)
        })
        .collect()
}

/// SHA-256 over the 8-bit quantization of every pair, in corpus order.
pub fn corpus_sha256(corpus: &[(GrayscaleImage, RgbImage)]) -> String {
    let mut h = Sha256::new();
    for (gray, color) in corpus {
        for &v in gray.data() {
            h.update([(v * 255.0).round() as u8]);
        }
        for &v in color.data() {
            h.update([(v * 255.0).round() as u8]);
        }
    }
    hex::encode(h.finalize())
}

/// Writes the corpus as `synth_NNNN.png` color files for use with
/// `train --data` / `evaluate`.
pub fn write_corpus(dir: &Path, n: usize, size: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (i, (_, color)) in generate_corpus(n, size, seed).iter().enumerate() {
        save_rgb(color, &dir.join(format!("synth_{i:04}.png")))?;
    }
    Ok(())
}
